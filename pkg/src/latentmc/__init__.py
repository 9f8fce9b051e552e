"""Generative time-series modeling with a discrete Markov-chain latent space.

End-to-end variationally trained model over a learned codebook, plus VQ-VAE
and HMM-EM baselines and an evaluation harness.
"""

from .autodiff import Tensor, backward, no_grad
from .model import ElboComponents, GenerativeModel, ModelConfig, PriorOutputs
from .training import TrainConfig, beta_schedule, checkpoint_load, checkpoint_save, train

__all__ = [
    "Tensor",
    "backward",
    "no_grad",
    "GenerativeModel",
    "ModelConfig",
    "PriorOutputs",
    "ElboComponents",
    "TrainConfig",
    "beta_schedule",
    "train",
    "checkpoint_save",
    "checkpoint_load",
]
