"""Personalized-PageRank style propagation over a normalized adjacency.

Two routes share one operator ``A_eps = eps*I + (1-eps)*A_hat``:

* ``propagate_dense`` applies ``A_eps^L`` to a payload by L successive
  sparse-dense products (the GPN and APPNP path, never forming the power).
* ``ppr_matrix`` forms ``A_eps^L`` explicitly, optionally sparsifying after
  every multiply, so that its rows can be used as mixture weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .sparse import (
    SparseMatrix,
    add_self_loops,
    linear_combination,
    normalize_rw,
    normalize_sym,
    sparsify_to_diagonal,
    spmm,
    spspmm,
)

RANDOM_WALK = "random_walk"
SYMMETRIC = "symmetric"
NORMALIZATIONS = (RANDOM_WALK, SYMMETRIC)

DEFAULT_DELTA = 1e-4
SPARSIFY_NODE_THRESHOLD = 10_000


@dataclass(frozen=True)
class PprConfig:
    teleport_epsilon: float = 0.1
    power_iterations: int = 10
    sparsify_delta: Optional[float] = None
    normalization: str = RANDOM_WALK

    def __post_init__(self):
        if not 0.0 <= self.teleport_epsilon <= 1.0:
            raise ValueError(f"teleport_epsilon must lie in [0, 1], got {self.teleport_epsilon}")
        if self.power_iterations < 0:
            raise ValueError(f"power_iterations must be >= 0, got {self.power_iterations}")
        if self.sparsify_delta is not None and not 0.0 < self.sparsify_delta < 1.0:
            raise ValueError(f"sparsify_delta must lie in (0, 1), got {self.sparsify_delta}")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}")

    @classmethod
    def for_graph(cls, n_nodes: int, **kwargs) -> PprConfig:
        """Default config, with sparsification switched on for large graphs."""
        if "sparsify_delta" not in kwargs and n_nodes > SPARSIFY_NODE_THRESHOLD:
            kwargs["sparsify_delta"] = DEFAULT_DELTA
        return cls(**kwargs)


def normalize(adjacency: SparseMatrix, normalization: str) -> SparseMatrix:
    """Normalize a raw 0/1 adjacency the way ``normalization`` asks.

    Symmetric normalization inserts self-loops for isolated nodes first;
    random-walk normalization does so itself.
    """
    if normalization == RANDOM_WALK:
        return normalize_rw(adjacency, add_self_loops_to_isolated=True)
    if normalization == SYMMETRIC:
        return normalize_sym(add_self_loops(adjacency, only_isolated=True))
    raise ValueError(f"unknown normalization {normalization!r}")


def a_eps(normalized: SparseMatrix, cfg: PprConfig) -> SparseMatrix:
    """``eps*I + (1-eps)*A_hat`` for an already normalized ``A_hat``."""
    eps = cfg.teleport_epsilon
    return linear_combination(SparseMatrix.identity(normalized.n_rows), eps, normalized, 1.0 - eps)


def propagation_operator(adjacency: SparseMatrix, cfg: PprConfig) -> SparseMatrix:
    """Normalize the raw adjacency and blend in the teleport term."""
    return a_eps(normalize(adjacency, cfg.normalization), cfg)


def propagate_dense(adjacency: SparseMatrix, payload, cfg: PprConfig) -> np.ndarray:
    """``A_eps^L @ payload`` via L sparse-dense products, right to left."""
    payload = np.asarray(payload, dtype=np.float64)
    if payload.shape[0] != adjacency.n_rows:
        raise ValueError(f"payload has {payload.shape[0]} rows, graph has {adjacency.n_rows} nodes")
    op = propagation_operator(adjacency, cfg)
    out = payload.copy()
    for _ in range(cfg.power_iterations):
        out = spmm(op, out)
    return out


def ppr_matrix(adjacency: SparseMatrix, cfg: PprConfig) -> SparseMatrix:
    """Explicit ``A_eps^L``, left-accumulated with optional per-step sparsification."""
    op = propagation_operator(adjacency, cfg)
    pi = SparseMatrix.identity(adjacency.n_rows)
    for _ in range(cfg.power_iterations):
        pi = spspmm(pi, op)
        if cfg.sparsify_delta is not None:
            pi = sparsify_to_diagonal(pi, cfg.sparsify_delta)
    return pi
