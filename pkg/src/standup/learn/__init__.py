from .mlp import MLP
from .policy import GaussianPolicy
from .gae import compute_gae, aggregate_advantages
from .losses import ppo_policy_loss, critic_loss, l2c2_loss
from .adam import Adam
from .trainer import Trainer, IterationReport
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "MLP", "GaussianPolicy", "compute_gae", "aggregate_advantages",
    "ppo_policy_loss", "critic_loss", "l2c2_loss", "Adam",
    "Trainer", "IterationReport", "save_checkpoint", "load_checkpoint",
]
