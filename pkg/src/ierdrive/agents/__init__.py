"""Decision makers: rule-based baselines and the DQN learner."""
from .dqn import VARIANTS, DQNAgent, agent_from_checkpoint, double_q_target, epsilon_at, get_variant, train
from .qnet import Adam, QNetworkParams, greedy_action, init_params, q_forward
from .replay import PrioritizedReplay, SumTree
from .ttc import ConstantAgent, RandomAgent, TTCAgent, time_to_reach, ttc_policy
