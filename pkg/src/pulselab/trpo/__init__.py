from .core import (Checkpoint, TrainConfig, evaluate, load_checkpoint,
                   lr_schedule, policy_update, save_checkpoint, train,
                   value_update)
from .gae import compute_gae
from .nets import PolicyNet, ValueNet
from .rollout import RolloutBatch

__all__ = [
    "Checkpoint", "TrainConfig", "PolicyNet", "ValueNet", "RolloutBatch",
    "compute_gae", "evaluate", "load_checkpoint", "lr_schedule",
    "policy_update", "save_checkpoint", "train", "value_update",
]
