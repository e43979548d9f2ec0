"""Double DQN with prioritized replay and an epsilon-greedy training loop.

Variants::

    A1  Sc02                     no occlusions, no ibit
    A2  Sc07                     no occlusions, no ibit
    A3  Sc02 + Sc07 (uniform)    no occlusions, no ibit
    A4  Sc07                     occlusions,    no ibit
    A5  Sc07                     no occlusions, ibit
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import Config, EnvConfig, TrainConfig
from ..encoder import observation_size
from ..env import Action, IntersectionEnv
from ..scenarios import get_scenario
from .qnet import Adam, QNetworkParams, greedy_action, init_params, loss_and_grads, q_forward
from .replay import PrioritizedReplay

log = logging.getLogger(__name__)

N_ACTIONS = len(Action)


@dataclass(frozen=True)
class Variant:
    name: str
    scenarios: Tuple[str, ...]
    occlusions: bool = False
    ibit: bool = False


VARIANTS: Dict[str, Variant] = {
    "A1": Variant("A1", ("Sc02",)),
    "A2": Variant("A2", ("Sc07",)),
    "A3": Variant("A3", ("Sc02", "Sc07")),
    "A4": Variant("A4", ("Sc07",), occlusions=True),
    "A5": Variant("A5", ("Sc07",), ibit=True),
}


def get_variant(name: str) -> Variant:
    try:
        return VARIANTS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown agent variant {name!r}; expected one of {sorted(VARIANTS)}") from None


def epsilon_at(step: int, total_steps: int, eps_final: float = 0.05, fraction: float = 0.3) -> float:
    """Linear decay from 1 to ``eps_final`` over the first ``fraction`` of
    training, flat afterwards."""
    horizon = max(1.0, fraction * total_steps)
    return 1.0 + min(1.0, step / horizon) * (eps_final - 1.0)


def beta_at(step: int, total_steps: int, beta0: float = 0.4, beta1: float = 1.0) -> float:
    return beta0 + min(1.0, step / max(1, total_steps)) * (beta1 - beta0)


def double_q_target(
    online: QNetworkParams,
    target: QNetworkParams,
    rewards: np.ndarray,
    next_obs: np.ndarray,
    dones: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """y = r + gamma * (1 - done) * Q_target(s', argmax_a Q_online(s', a))."""
    best = np.argmax(q_forward(online, next_obs), axis=1)
    q_next = q_forward(target, next_obs)[np.arange(len(best)), best]
    return rewards + gamma * (1.0 - dones) * q_next


class DQNAgent:
    """Greedy policy over a trained network."""

    def __init__(self, params: QNetworkParams, variant: Variant | None = None, name: str = "dqn"):
        self.params = params
        self.variant = variant
        self.name = name

    @property
    def ibit(self) -> bool:
        if self.variant is not None:
            return self.variant.ibit
        return self.params.input_width == observation_size(True)

    def check_env(self, env: IntersectionEnv) -> None:
        if env.observation_size != self.params.input_width:
            raise ValueError(
                f"network expects {self.params.input_width} inputs, environment emits {env.observation_size}"
            )

    def act(self, obs: np.ndarray, env=None) -> Action:
        return Action(greedy_action(self.params, obs))


# -- checkpoints --------------------------------------------------------------


def save_checkpoint(path, params: QNetworkParams, meta: dict) -> Tuple[Path, Path]:
    """Write ``<path>.npz`` (weights) and ``<path>.json`` (metadata)."""
    base = Path(path)
    if base.suffix in (".npz", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    npz = base.with_suffix(".npz")
    np.savez(npz, **params.to_npz_dict())
    meta_path = base.with_suffix(".json")
    meta_path.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return npz, meta_path


def load_checkpoint(path) -> Tuple[QNetworkParams, dict]:
    base = Path(path)
    if base.suffix in (".npz", ".json"):
        base = base.with_suffix("")
    npz, meta_path = base.with_suffix(".npz"), base.with_suffix(".json")
    if not npz.is_file():
        raise FileNotFoundError(f"no checkpoint at {npz}")
    with np.load(npz) as data:
        params = QNetworkParams.from_npz_dict(data)
    meta = json.loads(meta_path.read_text()) if meta_path.is_file() else {}
    ibit = bool(meta.get("ibit", False))
    if meta and params.input_width != observation_size(ibit, meta.get("n_patches", 50)):
        raise ValueError("checkpoint ibit flag does not match the network input width")
    return params, meta


def agent_from_checkpoint(path) -> Tuple[DQNAgent, dict]:
    params, meta = load_checkpoint(path)
    variant = VARIANTS.get(meta.get("variant", ""))
    return DQNAgent(params, variant, name=meta.get("variant", "dqn")), meta


# -- training -----------------------------------------------------------------


@dataclass
class EpisodeLog:
    step: int
    episode: int
    scenario: str
    ret: float
    outcome: str
    epsilon: float
    loss: float


@dataclass
class TrainResult:
    params: QNetworkParams
    episodes: List[EpisodeLog] = field(default_factory=list)
    evals: List[Tuple[int, float]] = field(default_factory=list)
    steps: int = 0
    seconds: float = 0.0

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["step", "episode", "scenario", "return", "outcome", "epsilon", "mean_loss"])
            for e in self.episodes:
                out.writerow([e.step, e.episode, e.scenario, f"{e.ret:.4f}", e.outcome, f"{e.epsilon:.4f}", f"{e.loss:.6f}"])


def train(
    variant: Variant | str,
    steps: int,
    seed: int = 0,
    cfg: Config | None = None,
    out: str | Path | None = None,
    callback: Optional[Callable[[int, QNetworkParams], None]] = None,
) -> TrainResult:
    """Train one agent variant for ``steps`` environment steps.

    The epsilon and beta schedules are laid out over ``steps`` (the run's
    budget). ``callback(step, params)`` fires after every environment step
    once learning has started. With ``out`` a checkpoint and a CSV log are
    written next to it, plus intermediate checkpoints at every evaluation.
    """
    if isinstance(variant, str):
        variant = get_variant(variant)
    cfg = cfg or Config()
    tc: TrainConfig = cfg.train
    if steps < 1:
        raise ValueError("steps must be positive")

    rng = np.random.default_rng(seed)
    env = IntersectionEnv(cfg.env)
    scenarios = [get_scenario(n) for n in variant.scenarios]
    obs_dim = observation_size(variant.ibit, cfg.env.n_patches)
    online = init_params((obs_dim, *tc.hidden, N_ACTIONS), rng)
    target = online.copy()
    opt = Adam(tc.lr, tc.adam_betas[0], tc.adam_betas[1], tc.adam_eps)
    buffer = PrioritizedReplay(tc.buffer_size, obs_dim, tc.per_alpha, tc.per_eps)
    result = TrainResult(online)

    meta = {
        "variant": variant.name,
        "scenarios": list(variant.scenarios),
        "occlusions": variant.occlusions,
        "ibit": variant.ibit,
        "n_patches": cfg.env.n_patches,
        "seed": seed,
        "steps": steps,
        "config": cfg.to_dict(),
    }

    def new_episode():
        sc = scenarios[int(rng.integers(len(scenarios)))]
        ep_seed = int(rng.integers(2**31 - 1))
        return sc, env.reset(sc, ep_seed, variant.occlusions, variant.ibit)

    t0 = time.perf_counter()
    scenario, obs = new_episode()
    ep_ret, ep_losses, episode = 0.0, [], 0
    for step in range(steps):
        eps = epsilon_at(step, steps, tc.eps_final, tc.exploration_fraction)
        if rng.random() < eps:
            action = int(rng.integers(N_ACTIONS))
        else:
            action = greedy_action(online, obs)
        res = env.step(action)
        # a timeout truncates the episode, it is not a terminal state
        done = res.terminal and res.outcome != "timeout"
        buffer.add(obs, action, res.reward, res.observation, done)
        ep_ret += res.reward
        obs = res.observation

        if step >= tc.warmup and len(buffer) >= tc.batch_size:
            batch = buffer.sample(tc.batch_size, beta_at(step, steps, tc.per_beta0, tc.per_beta1), rng)
            y = double_q_target(online, target, batch.rewards, batch.next_obs, batch.dones, tc.gamma)
            loss, grads, td = loss_and_grads(online, batch.obs, batch.actions, y, batch.weights, tc.huber_delta)
            opt.step(online, grads)
            buffer.update_priorities(batch.indices, td)
            ep_losses.append(loss)
            if callback is not None:
                callback(step, online)
        if (step + 1) % tc.target_sync == 0:
            target = online.copy()

        if res.terminal:
            result.episodes.append(
                EpisodeLog(step + 1, episode, scenario.name, ep_ret, res.outcome, eps,
                           float(np.mean(ep_losses)) if ep_losses else 0.0)
            )
            episode += 1
            ep_ret, ep_losses = 0.0, []
            scenario, obs = new_episode()

        if tc.eval_every and (step + 1) % tc.eval_every == 0 and step + 1 < steps:
            sr = _quick_eval(online, variant, cfg, tc.eval_episodes, seed)
            result.evals.append((step + 1, sr))
            log.info("step %d  eval SR %.3f  episodes %d", step + 1, sr, episode)
            if out is not None:
                save_checkpoint(f"{Path(out).with_suffix('')}_step{step + 1}", online, dict(meta, steps=step + 1))

    result.steps = steps
    result.seconds = time.perf_counter() - t0
    if out is not None:
        meta["evals"] = result.evals
        save_checkpoint(out, online, meta)
        result.write_log(Path(out).with_suffix(".log.csv"))
    return result


def _quick_eval(params, variant: Variant, cfg: Config, n: int, seed: int) -> float:
    from ..evaluation import run_eval

    agent = DQNAgent(params.copy(), variant)
    rates = [
        run_eval(agent, get_scenario(name), n, variant.occlusions, seed + 10_000, cfg.env, variant.ibit).sr
        for name in variant.scenarios
    ]
    return float(np.mean(rates))
