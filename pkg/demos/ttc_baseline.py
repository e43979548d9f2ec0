"""Rule-based baseline across the scenario library.

Runs the time-to-collision agent without and with occluders and prints the
success and early-termination rates per scenario.

    python demos/ttc_baseline.py [episodes]
"""
import sys

from ierdrive.agents import TTCAgent
from ierdrive.evaluation import emit_report, run_eval
from ierdrive.scenarios import SCENARIO_NAMES, get_scenario

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 50
agent = TTCAgent()
for occlusions in (False, True):
    rows = [run_eval(agent, get_scenario(n), episodes, occlusions, seed=0) for n in SCENARIO_NAMES]
    print(f"\nocclusions {'on' if occlusions else 'off'}")
    print(emit_report(rows))
