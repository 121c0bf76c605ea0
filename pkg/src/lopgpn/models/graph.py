"""Graph models built on the feature-level predictor.

* ``appnp_baseline`` propagates first-order softmax probabilities.
* ``gpn_rw`` / ``gpn_sym`` propagate pseudo-counts into one Dirichlet per node.
* ``lop_gpn`` pools the neighbours' Dirichlets into a mixture whose weights
  are the node's row of the explicit PPR matrix.
"""

from __future__ import annotations

from typing import List

import numpy as np

from ..diffmath import tensor as T
from ..diffmath.tensor import Tensor
from ..propagation import RANDOM_WALK, SYMMETRIC, PprConfig, ppr_matrix, propagate_dense, propagation_operator
from ..secondorder import Dirichlet, DirichletMixture
from ..sparse import SparseMatrix

APPNP = "appnp_baseline"
GPN_RW = "gpn_rw"
GPN_SYM = "gpn_sym"
LOP_GPN = "lop_gpn"
MODEL_KINDS = (APPNP, GPN_RW, GPN_SYM, LOP_GPN)


def normalization_for(kind: str) -> str:
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; valid: {', '.join(MODEL_KINDS)}")
    return SYMMETRIC if kind == GPN_SYM else RANDOM_WALK


def _check_lop(cfg: PprConfig):
    if cfg.normalization != RANDOM_WALK:
        raise ValueError("lop_gpn needs random-walk normalization to produce valid mixtures")


# forward passes on plain arrays --------------------------------------------


def forward_gpn(alphas_ft, adjacency: SparseMatrix, cfg: PprConfig) -> List[Dirichlet]:
    alphas_ft = np.asarray(alphas_ft, dtype=np.float64)
    if np.any(alphas_ft <= 0):
        raise ValueError("feature pseudo-counts must be positive")
    return [Dirichlet(row) for row in propagate_dense(adjacency, alphas_ft, cfg)]


def forward_lop(alphas_ft, adjacency: SparseMatrix, cfg: PprConfig) -> List[DirichletMixture]:
    _check_lop(cfg)
    alphas_ft = np.asarray(alphas_ft, dtype=np.float64)
    if alphas_ft.shape[0] != adjacency.n_rows:
        raise ValueError("one pseudo-count row per node required")
    pi = ppr_matrix(adjacency, cfg)
    components = [Dirichlet(row) for row in alphas_ft]
    mixtures = []
    for i in range(pi.n_rows):
        cols, weights = pi.row(i)
        keep = weights > 0
        mixtures.append(
            DirichletMixture(weights[keep] / weights[keep].sum(), tuple(components[j] for j in cols[keep]))
        )
    return mixtures


def forward_appnp(class_probs, adjacency: SparseMatrix, cfg: PprConfig) -> np.ndarray:
    return propagate_dense(adjacency, class_probs, cfg)


# tape versions used in training ---------------------------------------------


def propagate_tensor(op: SparseMatrix, payload: Tensor, steps: int) -> Tensor:
    out = payload
    for _ in range(steps):
        out = T.sparse_matmul(op, out)
    return out


def dirichlet_entropy_tensor(alpha: Tensor) -> Tensor:
    """Row-wise differential entropy of Dir(alpha) for alpha of shape (m, K)."""
    k = alpha.shape[1]
    alpha0 = T.tsum(alpha, axis=1)
    return (
        T.tsum(T.lgamma(alpha), axis=1)
        - T.lgamma(alpha0)
        + (alpha0 - k) * T.digamma(alpha0)
        - T.tsum((alpha - 1.0) * T.digamma(alpha), axis=1)
    )


def _label_gather(alpha: Tensor, rows, labels) -> Tensor:
    n, k = alpha.shape
    flat = T.reshape(alpha, (n * k,))
    return T.index_select(flat, np.asarray(rows) * k + np.asarray(labels))


def loss_gpn(alpha_agg: Tensor, labels, mask, entropy_weight: float) -> Tensor:
    """Sum over masked nodes of ``UCE(Dir(alpha_agg_i), y_i) - w * H(Dir(alpha_agg_i))``."""
    idx = np.flatnonzero(mask)
    labels = np.asarray(labels)[idx]
    sel = T.index_select(alpha_agg, idx, axis=0)
    alpha0 = T.tsum(sel, axis=1)
    uce = T.digamma(alpha0) - T.digamma(_label_gather(sel, np.arange(len(idx)), labels))
    terms = uce if entropy_weight == 0 else uce - entropy_weight * dirichlet_entropy_tensor(sel)
    loss = T.tsum(terms)
    if not np.isfinite(loss.value):
        raise FloatingPointError("non-finite GPN loss")
    return loss


def loss_lop(alphas_ft: Tensor, pi: SparseMatrix, labels, mask, entropy_weight: float) -> Tensor:
    """Differentiable upper bound of the pooled second-order loss.

    ``sum_{i in mask} sum_j pi[i, j] (UCE(Dir(alpha_ft_j), y_i) - w * H(Dir(alpha_ft_j)))``
    """
    idx = np.flatnonzero(mask)
    labels = np.asarray(labels)
    pair_i, pair_j, pair_w = [], [], []
    for i in idx:
        cols, weights = pi.row(i)
        pair_i.append(np.full(len(cols), i))
        pair_j.append(cols)
        pair_w.append(weights)
    if not pair_i:
        return Tensor(0.0)
    pair_i = np.concatenate(pair_i)
    pair_j = np.concatenate(pair_j)
    pair_w = np.concatenate(pair_w)

    # per-component terms only for components that carry weight
    used, inverse = np.unique(pair_j, return_inverse=True)
    comp = T.index_select(alphas_ft, used, axis=0)
    dig0 = T.digamma(T.tsum(comp, axis=1))
    dig_label = T.digamma(_label_gather(comp, inverse, labels[pair_i]))
    uce = T.index_select(dig0, inverse) - dig_label
    if entropy_weight != 0:
        uce = uce - entropy_weight * T.index_select(dirichlet_entropy_tensor(comp), inverse)
    loss = T.tsum(uce * pair_w)
    if not np.isfinite(loss.value):
        raise FloatingPointError("non-finite LOP-GPN loss")
    return loss


def loss_appnp(probs: Tensor, labels, mask) -> Tensor:
    idx = np.flatnonzero(mask)
    picked = _label_gather(probs, idx, np.asarray(labels)[idx])
    loss = -T.tsum(T.log(picked))
    if not np.isfinite(loss.value):
        raise FloatingPointError("non-finite APPNP loss")
    return loss


def softmax_tensor(logits: Tensor) -> Tensor:
    return T.exp(logits - T.logsumexp(logits, axis=1, keepdims=True))


__all__ = [
    "APPNP",
    "GPN_RW",
    "GPN_SYM",
    "LOP_GPN",
    "MODEL_KINDS",
    "dirichlet_entropy_tensor",
    "forward_appnp",
    "forward_gpn",
    "forward_lop",
    "loss_appnp",
    "loss_gpn",
    "loss_lop",
    "normalization_for",
    "propagate_tensor",
    "propagation_operator",
    "softmax_tensor",
]
