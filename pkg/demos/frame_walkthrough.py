"""What the agent sees.

Drives the ego toward the Sc07 crossing at constant speed with occluders on
and prints the non-empty patches of the frame every second, marking where a
phantom stands in for a hidden stretch of lane.
"""
from ierdrive.encoder import CHANNELS
from ierdrive.env import Action, IntersectionEnv
from ierdrive.scenarios import get_scenario

env = IntersectionEnv()
sc = get_scenario("Sc07")
env.reset(sc, seed=0, occlusions_enabled=True, include_ibit=True)
print("conflicts:", {pid: [(round(r.s_a, 1), r.kind) for r in regs] for pid, regs in sc.conflicts().items()})

for step in range(40):
    if step % 3 == 0:
        ego = env.world.ego
        phantoms = [v for v in env.perceived() if v.phantom]
        print(f"\nt={env.world.t:4.1f} s  ego s={ego.s_front:6.1f} m  v={ego.v:5.2f} m/s  phantoms={len(phantoms)}")
        data = env.current_frame().data
        for k, row in enumerate(data):
            if row[0] < 1.0 or row[4] > 0:
                cells = "  ".join(f"{c}={x:.2f}" for c, x in zip(CHANNELS, row))
                print(f"  patch {k:2d}  {cells}")
    if env.step(Action.MAINTAIN).terminal:
        print("\nepisode ended:", env.outcome)
        break
