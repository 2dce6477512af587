"""Constrained actor-critic learners built on hand-rolled numpy networks."""

from .ddpg import DdpgAgent
from .nets import Adam, Mlp, soft_update
from .replay import EnvTransition, ReplayBuffer
from .sac import SacAgent, featurize, squash, squashed_log_prob
from .train import (
    TrainSchedule,
    TrainingResult,
    build_agent,
    evaluate,
    load_checkpoint,
    reward_scale_for,
    save_checkpoint,
    train,
)

__all__ = [
    "Adam",
    "DdpgAgent",
    "EnvTransition",
    "Mlp",
    "ReplayBuffer",
    "SacAgent",
    "TrainSchedule",
    "TrainingResult",
    "build_agent",
    "evaluate",
    "featurize",
    "load_checkpoint",
    "reward_scale_for",
    "save_checkpoint",
    "soft_update",
    "squash",
    "squashed_log_prob",
    "train",
]
