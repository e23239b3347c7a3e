from .config import TrainConfig
from .network import AgentState, NetworkArch, QNetwork, q_forward
from .preprocess import preprocess_frame
from .replay import ReplayMemory, Transition
from .training import (
    compute_targets,
    epsilon_at,
    run_training,
    select_action,
    sync_target,
    train_step,
)
from .checkpoint import checkpoint_id, load_checkpoint, save_checkpoint

__all__ = [
    "TrainConfig",
    "AgentState",
    "NetworkArch",
    "QNetwork",
    "q_forward",
    "preprocess_frame",
    "ReplayMemory",
    "Transition",
    "compute_targets",
    "epsilon_at",
    "run_training",
    "select_action",
    "sync_target",
    "train_step",
    "checkpoint_id",
    "load_checkpoint",
    "save_checkpoint",
]
