"""Intersection-crossing simulator with a layout-invariant observation
encoding, a time-to-collision baseline and a numpy DQN learner."""
from .config import Config, EnvConfig, TTCConfig, TrainConfig, load_config
from .env import Action, IntersectionEnv
from .scenarios import ScenarioSpec, get_scenario, scenario_library

__version__ = "0.1.0"
