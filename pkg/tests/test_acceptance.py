"""Acceptance checks. Each test prints one PASS/FAIL line with the measured
value next to its tolerance, then asserts."""
import hashlib
import math
import time

import numpy as np
import pytest
from scipy import stats

from ierdrive.agents.dqn import DQNAgent, Variant, epsilon_at, train
from ierdrive.agents.qnet import init_params, loss_and_grads
from ierdrive.agents.replay import PrioritizedReplay, SumTree
from ierdrive.agents.dqn import double_q_target
from ierdrive.agents.ttc import RandomAgent, TTCAgent
from ierdrive.config import Config, EnvConfig
from ierdrive.encoder import _crossing_occupancy, encode, perceive, phantoms_from_occlusion
from ierdrive.env import IntersectionEnv, reward
from ierdrive.evaluation import emit_report, run_eval
from ierdrive.geometry import CROSSING, ConflictRegion, PolylinePath, conflict_regions
from ierdrive.scenarios import SCENARIO_NAMES, get_scenario
from ierdrive.traffic import VehicleState

# tolerances from the acceptance criteria
C1_MIN_SR = 0.98
C1_EPISODES = 200
C1_MAX_SECONDS = 60
C2_TARGET = 0.877
C2_BAND = 0.10
C2_EPISODES = 200
C2_MAX_SECONDS = 15 * 60
C4_TIME_TOL = 0.01
C7_REL_ERR = 1e-4
C7_P_MIN = 0.01
C8_STEPS = 200_000
C8_MARGIN = 0.20
C8_MAX_SECONDS = 2 * 3600


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        assert ok, detail

    return emit


def ttc_rows(names, episodes):
    agent = TTCAgent()
    return [run_eval(agent, get_scenario(n), episodes, False, seed=0) for n in names]


def test_c1_ttc_sc01_sc02(report):
    t0 = time.perf_counter()
    rows = ttc_rows(["Sc01", "Sc02"], C1_EPISODES)
    dt = time.perf_counter() - t0
    srs = {r.scenario: r.sr for r in rows}
    ok = all(v >= C1_MIN_SR for v in srs.values()) and dt < C1_MAX_SECONDS
    report("C1 TTC SR on Sc01/Sc02 >= 98 % over 200 episodes, < 1 min",
           ok, f"SR {srs}, {dt:.1f} s")


def test_c2_ttc_mean(report):
    t0 = time.perf_counter()
    rows = ttc_rows(SCENARIO_NAMES, C2_EPISODES)
    dt = time.perf_counter() - t0
    mean = float(np.mean([r.sr for r in rows]))
    print("\n" + emit_report(rows))
    ok = abs(mean - C2_TARGET) <= C2_BAND and dt < C2_MAX_SECONDS
    report("C2 TTC mean SR within 87.7 +/- 10 pp over Sc01-Sc13, < 15 min",
           ok, f"mean SR {100 * mean:.1f} %, {dt:.0f} s")


def random_scene(rng):
    name = SCENARIO_NAMES[int(rng.integers(len(SCENARIO_NAMES)))]
    sc = get_scenario(name)
    env = IntersectionEnv()
    env.reset(sc, int(rng.integers(1 << 30)), occlusions_enabled=bool(rng.integers(2)))
    for _ in range(int(rng.integers(0, 25))):
        if env.step(int(rng.integers(3))).terminal:
            break
    return sc, env.world.traffic, env.world.ego, env.occluders


def frame_for(sc, traffic, ego, occluders, cfg):
    view = perceive(sc, traffic, ego, occluders, cfg)
    return encode(view, ego, sc.conflicts(), sc.ego_path.length, True, cfg)


def test_c3_invariance(report):
    rng = np.random.default_rng(2024)
    cfg = EnvConfig()
    failures = 0
    for _ in range(100):
        sc, traffic, ego, occluders = random_scene(rng)
        base = frame_for(sc, traffic, ego, occluders, cfg)
        for _ in range(20):
            angle = float(rng.uniform(-math.pi, math.pi))
            offset = rng.uniform(-500, 500, 2)
            moved = sc.transformed(angle, offset)
            occ = [o.transformed(angle, offset) for o in occluders]
            if frame_for(moved, traffic, ego, occ, cfg) != base:
                failures += 1
    report("C3 IER invariance, 100 scenes x 20 rigid transforms", failures == 0, f"{failures} mismatches")


def sweep_oracle(front, length, v, width_other, theta, ego_width, crossing_u, dt=1e-3, horizon=12.0):
    """Advance the vehicle rectangle along its straight path in 1 ms steps and
    record when it first overlaps the ego corridor and when it leaves it."""
    t = np.arange(0.0, horizon, dt)
    d = np.array([math.cos(theta), math.sin(theta)])
    nrm = np.array([-d[1], d[0]])
    # path passes the ego centerline (y = 0) at arc length crossing_u
    centre = (front - length / 2 + v * t - crossing_u)[:, None] * d
    hl, hw = length / 2, width_other / 2
    ys = np.stack([centre[:, 1] + sx * hl * d[1] + sy * hw * nrm[1] for sx in (-1, 1) for sy in (-1, 1)], 1)
    inside = (ys.min(1) < ego_width / 2) & (ys.max(1) > -ego_width / 2)
    hit = np.flatnonzero(inside)
    if hit.size == 0:
        return math.inf, math.inf
    after = np.flatnonzero(~inside[hit[0]:])
    ttv = t[hit[0] + after[0]] if after.size else math.inf
    return t[hit[0]], ttv


def test_c4_encoder_oracle(report):
    rng = np.random.default_rng(7)
    cfg = EnvConfig()
    ego_path = PolylinePath([(0, 0), (400, 0)])
    worst = 0.0
    bad_range = 0
    for _ in range(1000):
        theta = float(rng.uniform(math.radians(50), math.radians(130)))
        x_c = float(rng.uniform(20, 45))
        d = np.array([math.cos(theta), math.sin(theta)])
        other = PolylinePath([np.array([x_c, 0.0]) - 200 * d, np.array([x_c, 0.0]) + 200 * d])
        regions = {"o": conflict_regions(ego_path, other)}
        v = float(rng.uniform(8.0, 20.0))
        (r,) = regions["o"]
        front = float(rng.uniform(r.u_a - 0.9 * v * 9.0, r.u_a - 1.0))
        veh = VehicleState("o", front, v)
        f = encode([veh], VehicleState("ego", 0.0, 10.0), regions, ego_path.length, False, cfg)
        k = int(math.floor(r.s_a))
        tto, ttv = f.data[k, 0] * cfg.t_max, f.data[k, 1] * cfg.t_max
        o_tto, o_ttv = sweep_oracle(front, veh.length, v, veh.width, theta, ego_path.width, 200.0)
        if o_ttv < cfg.t_max:
            worst = max(worst, abs(tto - o_tto), abs(ttv - o_ttv))
        elif o_tto < cfg.t_max:
            worst = max(worst, abs(tto - o_tto))
        # frame length and range with 0..100 vehicles
        n = int(rng.integers(0, 101))
        crowd = [VehicleState("o", float(rng.uniform(0, 400)), float(rng.uniform(0, 20))) for _ in range(n)]
        g = encode(crowd, VehicleState("ego", 0.0, float(rng.uniform(0, 19.44))), regions, ego_path.length, True, cfg)
        if g.data.shape != (50, 5) or g.data.min() < 0 or g.data.max() > 1:
            bad_range += 1
    ok = worst <= C4_TIME_TOL and bad_range == 0
    report("C4 encoder vs 1 ms sweep oracle, 1000 scenes, tol 0.01 s", ok,
           f"max |dt| {worst:.4f} s, {bad_range} frames out of shape/range")


def test_c5_reward_grid(report):
    w = IntersectionEnv().weights
    mismatches = 0
    for v in range(20):
        for a in (3.0, 0.0, -3.0):
            for event in ("collision", "near", "none"):
                got = reward(float(v), a, event != "none", w)
                want = 0.0
                if event != "none":
                    want -= 115.0
                if v > 130 / 9:
                    want -= 0.03 * abs(v - 130 / 9)
                elif v < 120 / 9:
                    want -= 0.01 * abs(v - 120 / 9)
                want -= 0.002 * abs(a)
                mismatches += got != want
    report("C5 reward grid 20 speeds x 3 actions x 3 events", mismatches == 0, f"{mismatches} mismatches")


def test_c6_phantom_worst_case(report):
    rng = np.random.default_rng(11)
    limit = 50 / 3.6
    violations = 0
    for _ in range(200):
        u_a = 200.0
        b = float(rng.uniform(100.0, 195.0))
        a = float(rng.uniform(max(0.0, b - 40.0), b - 5.5))
        region = ConflictRegion((10.0, 12.0), (u_a, u_a + 2.0), CROSSING)
        (ph,) = phantoms_from_occlusion({"o": [(a, b)]}, limit)
        f = encode([ph], VehicleState("ego", 0.0, 10.0), {"o": [region]}, 1000.0)
        ph_tto = f.data[10, 0] * 10.0
        for front in np.arange(a + 5.0, b + 1e-9, 0.5):
            for v in np.arange(0.5, limit + 1e-9, 0.5):
                real_tto = _crossing_occupancy(VehicleState("o", float(front), float(v)), region)[0]
                if min(real_tto, 10.0) < ph_tto - 1e-12:
                    violations += 1
    report("C6 phantom tto <= hidden-vehicle tto, 200 intervals on a 0.5 m x 0.5 m/s grid",
           violations == 0, f"{violations} violations")


def test_c7_learner(report):
    rng = np.random.default_rng(3)
    # gradients
    worst = 0.0
    for _ in range(20):
        sizes = (int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(2, 6)), 3)
        p = init_params(sizes, rng)
        # generic biases keep pre-activations off the ReLU kink at exactly 0
        for b in p.biases:
            b[:] = rng.normal(0.0, 0.1, b.shape)
        obs = rng.random((5, sizes[0]))
        acts = rng.integers(0, 3, 5)
        tgt = rng.normal(0, 2, 5)
        wts = rng.uniform(0.1, 1.0, 5)
        _, grads, _ = loss_and_grads(p, obs, acts, tgt, wts)
        num, ana = [], []
        for arr, g in zip(p.arrays(), grads.arrays()):
            for i in np.ndindex(arr.shape):
                keep = arr[i]
                arr[i] = keep + 1e-6
                lp = loss_and_grads(p, obs, acts, tgt, wts)[0]
                arr[i] = keep - 1e-6
                lm = loss_and_grads(p, obs, acts, tgt, wts)[0]
                arr[i] = keep
                num.append((lp - lm) / 2e-6)
                ana.append(g[i])
        num, ana = np.array(num), np.array(ana)
        worst = max(worst, np.linalg.norm(num - ana) / max(np.linalg.norm(num) + np.linalg.norm(ana), 1e-12))

    # PER at uniform priorities
    buf = PrioritizedReplay(100, 1)
    for i in range(100):
        buf.add([i], 0, 0.0, [i], False)
    draws = np.concatenate([buf.sample_indices(256, rng) for _ in range(400)])
    p_chi = stats.chisquare(np.bincount(draws, minlength=100)).pvalue

    # sum tree under 1M random operations (dyadic priorities add exactly)
    tree = SumTree(50_000)
    ops = 0
    while ops < 1_000_000:
        if rng.random() < 0.5:
            tree.update(int(rng.integers(50_000)), float(rng.integers(0, 1024)) / 256)
            ops += 1
        else:
            idx = rng.integers(0, 50_000, 1000)
            tree.update(idx, rng.integers(0, 1024, 1000) / 256)
            ops += 1000
    tree_exact = tree.total == float(np.sum(tree.leaves()))

    # Double-Q on a fixed 5-transition batch
    online = init_params((2, 3), rng)
    online.weights[0][:] = 0
    online.biases[0][:] = [0.0, 1.0, 0.5]
    target = init_params((2, 3), rng)
    target.weights[0][:] = 0
    target.biases[0][:] = [9.0, 1.0, -4.0]
    y = double_q_target(online, target, np.array([-115.0, 0.0, 0.5, -0.1, 2.0]), np.zeros((5, 2)),
                        np.array([1.0, 0.0, 0.0, 1.0, 0.0]), 0.99)
    dq_ok = np.allclose(y, [-115.0, 0.99, 1.49, -0.1, 2.99], rtol=0, atol=1e-12)

    ok = worst < C7_REL_ERR and p_chi > C7_P_MIN and tree_exact and dq_ok
    report("C7 learner: grads, PER chi-square, sum tree, Double-Q", ok,
           f"grad rel err {worst:.2e}, chi-square p {p_chi:.3f}, tree exact {tree_exact}, double-Q {dq_ok}")


@pytest.mark.slow
def test_c8_training_smoke(report):
    cfg = Config()
    variant = Variant("A2-config@Sc02", ("Sc02",))
    t0 = time.perf_counter()
    res = train(variant, C8_STEPS, seed=0, cfg=cfg)
    dt = time.perf_counter() - t0
    sc = get_scenario("Sc02")
    dqn = run_eval(DQNAgent(res.params, variant), sc, 200, seed=7)
    rnd = run_eval(RandomAgent(), sc, 200, seed=7)
    eps0 = epsilon_at(0, C8_STEPS)
    eps30 = epsilon_at(int(0.3 * C8_STEPS), C8_STEPS)
    ok = dqn.sr - rnd.sr >= C8_MARGIN and dt < C8_MAX_SECONDS and eps0 == 1.0 and math.isclose(eps30, 0.05)
    report("C8 200k-step training beats random by >= 20 pp on Sc02", ok,
           f"DQN SR {100 * dqn.sr:.1f} % vs random {100 * rnd.sr:.1f} %, {dt / 60:.1f} min, "
           f"eps(0)={eps0}, eps(30%)={eps30:.3f}")


def test_c9_determinism(report, tmp_path):
    for name in ("a", "b"):
        rows = [run_eval(TTCAgent(), get_scenario("Sc07"), 30, seed=5),
                run_eval(RandomAgent(), get_scenario("Sc02"), 30, seed=5)]
        emit_report(rows, tmp_path / f"{name}.csv")
    same_report = (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def trajectory():
        digests = []

        def snap(step, params):
            if step % 500 == 0:
                h = hashlib.sha256()
                for arr in params.arrays():
                    h.update(arr.tobytes())
                digests.append(h.hexdigest())

        res = train("A2", 10_000, seed=3, callback=snap)
        return digests, res.params

    d1, p1 = trajectory()
    d2, p2 = trajectory()
    same_traj = d1 == d2 and len(d1) > 10 and p1.allclose(p2)
    report("C9 determinism: report bytes and 10k-step parameter trajectory", same_report and same_traj,
           f"report identical {same_report}, trajectory identical {same_traj} ({len(d1)} snapshots)")
