"""Command line entry point: train, evaluate, rollout, encode.

Exit status is 0 on success, 2 for bad arguments (unknown scenario or
agent, conflicting flags, unreadable config) and 1 for anything else.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import Config, load_config
from .encoder import CHANNELS
from .env import Action, IntersectionEnv
from .evaluation import emit_report, episode_seed, run_eval
from .scenarios import ScenarioError, get_scenario, resolve_scenarios

log = logging.getLogger("ierdrive")


class UsageError(Exception):
    pass


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return value == "on"


def _positive_or_zero(value: str) -> int:
    n = int(value)
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def make_agent(spec: str, cfg: Config, ibit_flag):
    """Resolve ``ttc``, ``random`` or a checkpoint path; returns (agent, ibit)."""
    from .agents.dqn import agent_from_checkpoint
    from .agents.ttc import RandomAgent, TTCAgent

    name = spec.lower()
    if name == "ttc":
        agent = TTCAgent(cfg.ttc, cfg.env.accel)
        return agent, bool(ibit_flag)
    if name == "random":
        return RandomAgent(), bool(ibit_flag)
    path = Path(spec)
    if not (path.with_suffix(".npz").is_file() or path.is_file()):
        raise UsageError(f"unknown agent {spec!r}: not ttc, random or a checkpoint")
    try:
        agent, meta = agent_from_checkpoint(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ibit = bool(meta.get("ibit", False))
    if ibit_flag is not None and ibit_flag != ibit:
        raise UsageError(f"--ibit {'on' if ibit_flag else 'off'} conflicts with the checkpoint (trained with ibit {'on' if ibit else 'off'})")
    return agent, ibit


def cmd_train(args, cfg: Config) -> int:
    from .agents.dqn import get_variant, train

    try:
        variant = get_variant(args.agent)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.steps < 1:
        raise UsageError("--steps must be positive")
    res = train(variant, args.steps, args.seed, cfg, args.out)
    print(f"trained {variant.name} for {res.steps} steps in {res.seconds:.1f} s, {len(res.episodes)} episodes")
    print(f"checkpoint: {Path(args.out).with_suffix('.npz')}")
    return 0


def cmd_evaluate(args, cfg: Config) -> int:
    try:
        names = resolve_scenarios(args.scenarios)
    except ScenarioError as exc:
        raise UsageError(str(exc)) from exc
    agent, ibit = make_agent(args.agent, cfg, args.ibit)
    rows = []
    for name in names:
        rows.append(run_eval(agent, get_scenario(name), args.episodes, args.occlusions, args.seed, cfg.env, ibit))
        log.info("%s: SR %.3f", name, rows[-1].sr)
    print(emit_report(rows, args.out), end="")
    return 0


def cmd_rollout(args, cfg: Config) -> int:
    try:
        scenario = get_scenario(args.scenario)
    except ScenarioError as exc:
        raise UsageError(str(exc)) from exc
    agent, ibit = make_agent(args.agent, cfg, args.ibit)
    env = IntersectionEnv(cfg.env)
    seed = episode_seed(args.seed, 0)
    obs = env.reset(scenario, seed, args.occlusions, ibit)
    if hasattr(agent, "reset"):
        agent.reset(seed)
    while True:
        res = env.step(agent.act(obs, env))
        obs = res.observation
        if res.terminal:
            break
    env.write_trace(args.trace)
    print(f"{scenario.name}: {res.outcome} after {len(env.trace) - 1} steps, trace in {args.trace}")
    return 0


def cmd_encode(args, cfg: Config) -> int:
    try:
        scenario = get_scenario(args.scenario)
    except ScenarioError as exc:
        raise UsageError(str(exc)) from exc
    if args.at_step < 0:
        raise UsageError("--at-step must be >= 0")
    env = IntersectionEnv(cfg.env)
    env.reset(scenario, args.seed, args.occlusions, include_ibit=True)
    action = Action[args.action.upper()]
    for k in range(args.at_step):
        res = env.step(action)
        if res.terminal and k + 1 < args.at_step:
            raise UsageError(f"episode ended ({res.outcome}) at step {k + 1}, before step {args.at_step}")
    frame = env.current_frame()
    with open(args.out, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(CHANNELS)
        for row in frame.data:
            out.writerow([f"{x:.6f}" for x in row])
    print(f"wrote {len(frame.data)} patches to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ierdrive", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file overriding env/train/ttc constants")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a DQN agent variant")
    t.add_argument("--agent", required=True, help="A1 ... A5")
    t.add_argument("--steps", type=int, default=None, help="environment steps (default: config total_steps)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="checkpoint path (writes .npz and .json)")

    e = sub.add_parser("evaluate", help="SR/ETR over scenarios")
    e.add_argument("--agent", required=True, help="ttc, random or a checkpoint path")
    e.add_argument("--scenarios", default="all", help="all or a comma separated list")
    e.add_argument("--episodes", type=_positive_or_zero, default=1000)
    e.add_argument("--occlusions", type=_on_off, default=False, metavar="on|off")
    e.add_argument("--ibit", type=_on_off, default=None, metavar="on|off")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="CSV report path")

    r = sub.add_parser("rollout", help="one episode, written as a CSV trace")
    r.add_argument("--agent", required=True)
    r.add_argument("--scenario", required=True)
    r.add_argument("--trace", required=True)
    r.add_argument("--occlusions", type=_on_off, default=False, metavar="on|off")
    r.add_argument("--ibit", type=_on_off, default=None, metavar="on|off")
    r.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("encode", help="dump the observation frame at a given step")
    c.add_argument("--scenario", required=True)
    c.add_argument("--at-step", type=int, default=0)
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--occlusions", type=_on_off, default=False, metavar="on|off")
    c.add_argument("--action", choices=[a.name.lower() for a in Action], default="maintain",
                   help="action held until the requested step")
    return p


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "rollout": cmd_rollout, "encode": cmd_encode}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 2
    if args.command == "train" and args.steps is None:
        args.steps = cfg.train.total_steps
    try:
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
