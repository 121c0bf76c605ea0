"""Adam with bias correction, plus global-norm gradient clipping."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_stability: float = 1e-8
    step: int = 0
    first_moments: list = field(default_factory=list)
    second_moments: list = field(default_factory=list)


def clip_grad_norm(grads, max_norm: float):
    """Scale ``grads`` jointly so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm is None or total <= max_norm or total == 0.0:
        return list(grads), total
    scale = max_norm / total
    return [g * scale for g in grads], total


def adam_step(params, grads, state: AdamState):
    """Return updated parameter arrays; ``state`` is advanced in place."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    if not state.first_moments:
        state.first_moments = [np.zeros_like(p) for p in params]
        state.second_moments = [np.zeros_like(p) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(f"param {i}: shape {p.shape} vs grad {g.shape}")
        m = b1 * state.first_moments[i] + (1.0 - b1) * g
        v = b2 * state.second_moments[i] + (1.0 - b2) * g * g
        state.first_moments[i] = m
        state.second_moments[i] = v
        updated.append(p - state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps_stability))
    return updated
