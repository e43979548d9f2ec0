"""Episode rollouts, success/early-termination statistics and report output."""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .config import EnvConfig
from .env import IntersectionEnv
from .scenarios import ScenarioSpec
from .traffic import COLLISION, NEAR_COLLISION, SUCCESS

REPORT_COLUMNS = ["scenario", "agent", "episodes", "sr", "etr", "timeouts"]


@dataclass
class EvalRow:
    scenario: str
    agent: str
    episodes: int
    successes: int = 0
    early_terminations: int = 0
    timeouts: int = 0

    @property
    def sr(self) -> float:
        return self.successes / self.episodes if self.episodes else 0.0

    @property
    def etr(self) -> float:
        return self.early_terminations / self.episodes if self.episodes else 0.0

    def record(self, outcome: str) -> None:
        if outcome == SUCCESS:
            self.successes += 1
        elif outcome in (COLLISION, NEAR_COLLISION):
            self.early_terminations += 1
        else:
            self.timeouts += 1


def episode_seed(seed: int, episode: int) -> int:
    """Independent per-episode seed derived from the run seed."""
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


def rollout(agent, env: IntersectionEnv, scenario: ScenarioSpec, seed: int, occlusions: bool = False,
            ibit: bool = False) -> str:
    """Run one greedy episode and return its outcome."""
    obs = env.reset(scenario, seed, occlusions, ibit)
    if hasattr(agent, "reset"):
        agent.reset(seed)
    while True:
        res = env.step(agent.act(obs, env))
        obs = res.observation
        if res.terminal:
            return res.outcome


def run_eval(
    agent,
    scenario: ScenarioSpec,
    n_episodes: int,
    occlusions: bool = False,
    seed: int = 0,
    env_cfg: Optional[EnvConfig] = None,
    ibit: bool | None = None,
) -> EvalRow:
    if ibit is None:
        ibit = bool(getattr(agent, "ibit", False))
    env = IntersectionEnv(env_cfg)
    env.include_ibit = ibit
    if hasattr(agent, "check_env"):
        agent.check_env(env)
    row = EvalRow(scenario.name, getattr(agent, "name", type(agent).__name__), n_episodes)
    if n_episodes <= 0:
        warnings.warn(f"{scenario.name}: zero evaluation episodes, SR and ETR reported as 0", stacklevel=2)
        row.episodes = 0
        return row
    for ep in range(n_episodes):
        row.record(rollout(agent, env, scenario, episode_seed(seed, ep), occlusions, ibit))
    return row


def mean_row(rows: Sequence[EvalRow]) -> dict:
    rows = [r for r in rows if r.episodes]
    agents = sorted({r.agent for r in rows})
    return {
        "scenario": "Mean",
        "agent": agents[0] if len(agents) == 1 else "+".join(agents),
        "episodes": sum(r.episodes for r in rows),
        "sr": float(np.mean([r.sr for r in rows])) if rows else 0.0,
        "etr": float(np.mean([r.etr for r in rows])) if rows else 0.0,
        "timeouts": sum(r.timeouts for r in rows),
    }


def pct(x: float) -> str:
    return f"{100 * x:.1f} %"


def emit_report(rows: Sequence[EvalRow], path: str | Path | None = None) -> str:
    """Write the CSV (fractions to 4 decimals) and return a printable table."""
    records = [
        {"scenario": r.scenario, "agent": r.agent, "episodes": r.episodes, "sr": r.sr, "etr": r.etr,
         "timeouts": r.timeouts}
        for r in rows
    ]
    if rows:
        records.append(mean_row(rows))
    if path is not None:
        with open(path, "w", newline="") as fh:
            out = csv.DictWriter(fh, REPORT_COLUMNS)
            out.writeheader()
            for rec in records:
                out.writerow(dict(rec, sr=f"{rec['sr']:.4f}", etr=f"{rec['etr']:.4f}"))

    buf = io.StringIO()
    buf.write(f"{'Scenario':<10}{'Agent':<10}{'Episodes':>9}{'SR':>10}{'ETR':>10}{'Timeouts':>10}\n")
    for rec in records:
        buf.write(
            f"{rec['scenario']:<10}{rec['agent']:<10}{rec['episodes']:>9}"
            f"{pct(rec['sr']):>10}{pct(rec['etr']):>10}{rec['timeouts']:>10}\n"
        )
    return buf.getvalue()
