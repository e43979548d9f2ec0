"""Short DQN training run on Sc02 compared with a random policy.

A few tens of thousands of steps already move the agent off the random
baseline; the acceptance smoke run uses 200k.

    python demos/train_smoke.py [steps]
"""
import logging
import sys

from ierdrive.agents import DQNAgent, RandomAgent, train
from ierdrive.agents.dqn import Variant
from ierdrive.evaluation import emit_report, run_eval
from ierdrive.scenarios import get_scenario

logging.basicConfig(level=logging.INFO, format="%(message)s")
steps = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
variant = Variant("A2-config@Sc02", ("Sc02",))
result = train(variant, steps, seed=0)
print(f"trained {result.steps} steps in {result.seconds:.0f} s over {len(result.episodes)} episodes")

sc = get_scenario("Sc02")
rows = [
    run_eval(DQNAgent(result.params, variant, "dqn"), sc, 200, seed=7),
    run_eval(RandomAgent(), sc, 200, seed=7),
]
print(emit_report(rows))
