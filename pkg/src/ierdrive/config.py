"""Tunable constants with the published defaults, plus JSON overrides."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

KMH = 1.0 / 3.6


@dataclass
class EnvConfig:
    dt: float = 0.4
    max_steps: int = 250
    accel: float = 3.0
    v_init: float = 50 * KMH
    v_max: float = 70 * KMH
    speed_limit: float = 50 * KMH
    v_upper: float = 130 / 9  # 14.4...
    v_lower: float = 120 / 9  # 13.3...
    k_c: float = 115.0
    k_v_upper: float = 0.03
    k_v_lower: float = 0.01
    k_a: float = 0.002
    near_clearance: float = 10.0
    near_gap: float = 1.0
    preroll: float = 60.0
    vehicle_length: float = 5.0
    vehicle_width: float = 1.8
    spawn_headway: float = 8.0
    # encoder
    t_max: float = 10.0
    n_patches: int = 50
    patch_len: float = 1.0
    union_margin: float = 1.0
    shadow_step: float = 0.5
    shadow_lookback: float = 150.0


@dataclass
class TrainConfig:
    lr: float = 2e-4
    gamma: float = 0.99
    eps_final: float = 0.05
    exploration_fraction: float = 0.3
    buffer_size: int = 50_000
    batch_size: int = 256
    total_steps: int = 5_000_000
    hidden: Tuple[int, ...] = (60, 60)
    per_alpha: float = 0.6
    per_beta0: float = 0.4
    per_beta1: float = 1.0
    per_eps: float = 1e-6
    target_sync: int = 10_000
    warmup: int = 1_000
    huber_delta: float = 1.0
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    eval_every: int = 50_000
    eval_episodes: int = 50


@dataclass
class TTCConfig:
    threshold: float = 1.6
    v_cap: float = 50 * KMH


@dataclass
class Config:
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    ttc: TTCConfig = field(default_factory=TTCConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _apply(section, overrides: dict, name: str):
    known = {f.name: f for f in dataclasses.fields(section)}
    for key, value in overrides.items():
        if key not in known:
            raise KeyError(f"unknown {name} parameter: {key}")
        current = getattr(section, key)
        if isinstance(current, tuple):
            value = tuple(value)
        elif isinstance(current, float):
            value = float(value)
        elif isinstance(current, int):
            value = int(value)
        setattr(section, key, value)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> Config:
    """Defaults, optionally patched from a JSON file of the form
    ``{"env": {...}, "train": {...}, "ttc": {...}}``."""
    cfg = Config()
    data = {}
    if path is not None:
        data = json.loads(Path(path).read_text())
    if overrides:
        for k, v in overrides.items():
            data.setdefault(k, {}).update(v)
    for name, values in data.items():
        if not hasattr(cfg, name):
            raise KeyError(f"unknown config section: {name}")
        _apply(getattr(cfg, name), values, name)
    return cfg
