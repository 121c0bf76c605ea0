"""Autodiff tensors, special functions and the Adam optimizer."""

from .optim import AdamState, adam_step, clip_grad_norm
from .special import digamma, lgamma, log_beta, trigamma
from .tensor import Tensor, as_tensor, backward

__all__ = [
    "AdamState",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "clip_grad_norm",
    "digamma",
    "lgamma",
    "log_beta",
    "trigamma",
]
