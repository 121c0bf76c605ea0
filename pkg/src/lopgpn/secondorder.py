"""Dirichlet and Dirichlet-mixture second-order distributions.

Closed-form uncertainty measures (all entropies in nats, ``0 log 0 = 0``):

* ``tu``    Shannon entropy of the expected class distribution
* ``au``    expected Shannon entropy of the first-order distribution
* ``eu``    ``tu - au`` (mutual information)
* ``eu_so`` differential entropy of the second-order distribution; for a
  mixture the upper entropy bound is reported
* ``eu_pc`` negative pseudo-count mass ``-alpha_0``
* ``lconf`` least confidence ``1 - max mean``

Batch variants (``dirichlet_report``, ``mixture_report``) evaluate every
node of a graph at once. Monte-Carlo estimators at the bottom serve as
independent oracles; they use ``math.lgamma`` and sampling only, never the
closed forms above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .diffmath.special import digamma, log_beta
from .sparse import SparseMatrix, spmm

MEASURES = ("tu", "au", "eu", "eu_pc", "eu_so")


@dataclass(frozen=True, eq=False)
class Dirichlet:
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.float64)
        if alpha.ndim != 1 or alpha.size == 0:
            raise ValueError("alpha must be a non-empty vector")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise ValueError(f"alpha must be positive and finite, got {alpha}")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @property
    def alpha0(self) -> float:
        return float(self.alpha.sum())

    @property
    def n_classes(self) -> int:
        return self.alpha.size

    def __repr__(self):
        return f"Dirichlet({np.array2string(self.alpha, precision=4, separator=', ')})"


@dataclass(frozen=True, eq=False)
class DirichletMixture:
    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        components = tuple(c if isinstance(c, Dirichlet) else Dirichlet(c) for c in self.components)
        if weights.ndim != 1 or len(weights) != len(components) or not components:
            raise ValueError("need one weight per component and at least one component")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must be non-negative and sum to 1, got {weights}")
        if len({c.n_classes for c in components}) != 1:
            raise ValueError("components must share the number of classes")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", components)

    @property
    def n_classes(self) -> int:
        return self.components[0].n_classes

    def alphas(self) -> np.ndarray:
        return np.stack([c.alpha for c in self.components])


SecondOrder = Union[Dirichlet, DirichletMixture]


@dataclass(frozen=True)
class UncertaintyReport:
    """Uncertainty measures for one distribution (floats) or many (arrays).

    Measures that a model cannot provide are NaN.
    """

    tu: object
    au: object
    eu: object
    eu_pc: object
    eu_so: object

    def get(self, measure: str):
        if measure not in MEASURES:
            raise KeyError(f"unknown measure {measure!r}; valid: {', '.join(MEASURES)}")
        return getattr(self, measure)


# helpers on raw arrays ----------------------------------------------------


def shannon_entropy(p, axis=-1):
    p = np.asarray(p, dtype=np.float64)
    safe = np.where(p > 0, p, 1.0)
    return -np.sum(np.where(p > 0, p * np.log(safe), 0.0), axis=axis)


def dirichlet_expected_entropy(alpha):
    """Closed-form ``E[H(theta)]`` under ``Dir(alpha)``, along the last axis."""
    alpha = np.asarray(alpha, dtype=np.float64)
    alpha0 = alpha.sum(axis=-1, keepdims=True)
    return np.sum(alpha / alpha0 * (digamma(alpha0 + 1.0) - digamma(alpha + 1.0)), axis=-1)


def dirichlet_entropy(alpha):
    """Differential entropy of ``Dir(alpha)``, along the last axis."""
    alpha = np.asarray(alpha, dtype=np.float64)
    k = alpha.shape[-1]
    alpha0 = alpha.sum(axis=-1)
    return (
        log_beta(alpha, axis=-1)
        + (alpha0 - k) * digamma(alpha0)
        - np.sum((alpha - 1.0) * digamma(alpha), axis=-1)
    )


# single-distribution measures -----------------------------------------------


def mean(q: SecondOrder) -> np.ndarray:
    if isinstance(q, Dirichlet):
        return q.alpha / q.alpha0
    alphas = q.alphas()
    return q.weights @ (alphas / alphas.sum(axis=1, keepdims=True))


def tu(q: SecondOrder) -> float:
    return float(shannon_entropy(mean(q)))


def au(q: SecondOrder) -> float:
    if isinstance(q, Dirichlet):
        return float(dirichlet_expected_entropy(q.alpha))
    return float(q.weights @ dirichlet_expected_entropy(q.alphas()))


def eu(q: SecondOrder) -> float:
    return tu(q) - au(q)


def eu_so(q: SecondOrder) -> float:
    """Differential entropy; the upper mixture bound for a mixture."""
    if isinstance(q, Dirichlet):
        return float(dirichlet_entropy(q.alpha))
    return eu_so_bounds(q)[1]


def eu_so_bounds(m: DirichletMixture):
    """``(lower, upper)`` bounds on the differential entropy of a mixture."""
    if isinstance(m, Dirichlet):
        m = DirichletMixture([1.0], [m])
    lower = float(m.weights @ dirichlet_entropy(m.alphas()))
    return lower, lower + float(shannon_entropy(m.weights))


def eu_pc(q: SecondOrder) -> float:
    if isinstance(q, Dirichlet):
        return -q.alpha0
    return -float(q.weights @ q.alphas().sum(axis=1))


def lconf(q: SecondOrder) -> float:
    return 1.0 - float(mean(q).max())


def uce(d: Dirichlet, label: int) -> float:
    """Expected cross-entropy ``E[-log theta_label] = psi(alpha_0) - psi(alpha_label)``."""
    if not 0 <= label < d.n_classes:
        raise ValueError(f"label {label} out of range for {d.n_classes} classes")
    return float(digamma(d.alpha0) - digamma(d.alpha[label]))


def report(q: SecondOrder) -> UncertaintyReport:
    t, a = tu(q), au(q)
    return UncertaintyReport(tu=t, au=a, eu=t - a, eu_pc=eu_pc(q), eu_so=eu_so(q))


# batch measures over graph nodes -----------------------------------------------


def dirichlet_report(alphas) -> UncertaintyReport:
    """Measures for one Dirichlet per row of ``alphas``."""
    alphas = np.asarray(alphas, dtype=np.float64)
    t = shannon_entropy(alphas / alphas.sum(axis=1, keepdims=True))
    a = dirichlet_expected_entropy(alphas)
    return UncertaintyReport(tu=t, au=a, eu=t - a, eu_pc=-alphas.sum(axis=1), eu_so=dirichlet_entropy(alphas))


def mixture_entropy_bounds(weights: SparseMatrix, alphas):
    """Row-wise ``(lower, upper)`` entropy bounds of ``sum_j weights[i, j] Dir(alphas[j])``."""
    lower = spmm(weights, dirichlet_entropy(np.asarray(alphas, dtype=np.float64)))
    w = weights.values
    plogp = np.where(w > 0, w * np.log(np.where(w > 0, w, 1.0)), 0.0)
    weight_entropy = -np.bincount(weights.row_ids(), weights=plogp, minlength=weights.n_rows)
    return lower, lower + weight_entropy


def mixture_report(weights: SparseMatrix, alphas) -> UncertaintyReport:
    """Measures for the mixtures ``sum_j weights[i, j] Dir(alphas[j])``, one per row."""
    alphas = np.asarray(alphas, dtype=np.float64)
    alpha0 = alphas.sum(axis=1)
    t = shannon_entropy(spmm(weights, alphas / alpha0[:, None]))
    a = spmm(weights, dirichlet_expected_entropy(alphas))
    _, upper = mixture_entropy_bounds(weights, alphas)
    return UncertaintyReport(tu=t, au=a, eu=t - a, eu_pc=-spmm(weights, alpha0), eu_so=upper)


# sampling and Monte-Carlo oracles ------------------------------------------------


def _log_dirichlet_samples(alpha, n, rng):
    g = rng.gamma(np.broadcast_to(alpha, (n, len(alpha))), 1.0)
    return np.log(g) - np.log(g.sum(axis=1, keepdims=True))


def sample(q: SecondOrder, rng_seed, n: int) -> np.ndarray:
    """``n`` i.i.d. probability vectors, deterministic for a fixed seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    if isinstance(q, Dirichlet):
        g = rng.gamma(np.broadcast_to(q.alpha, (n, q.n_classes)), 1.0)
        return g / g.sum(axis=1, keepdims=True)
    picks = rng.choice(len(q.components), size=n, p=q.weights)
    alphas = q.alphas()[picks]
    g = rng.gamma(alphas, 1.0)
    return g / g.sum(axis=1, keepdims=True)


def _log_density(q: SecondOrder, log_theta):
    """Log density at samples given by their logs (stdlib lgamma only)."""
    comps = [q] if isinstance(q, Dirichlet) else list(q.components)
    weights = np.array([1.0]) if isinstance(q, Dirichlet) else q.weights
    parts = []
    for w, c in zip(weights, comps):
        if w == 0:
            continue
        log_norm = math.lgamma(c.alpha0) - math.fsum(math.lgamma(a) for a in c.alpha)
        parts.append(math.log(w) + log_norm + log_theta @ (c.alpha - 1.0))
    parts = np.stack(parts)
    top = parts.max(axis=0)
    return top + np.log(np.exp(parts - top).sum(axis=0))


def _mixture_log_samples(q: SecondOrder, n, rng):
    if isinstance(q, Dirichlet):
        return _log_dirichlet_samples(q.alpha, n, rng)
    picks = rng.choice(len(q.components), size=n, p=q.weights)
    alphas = q.alphas()[picks]
    g = rng.gamma(alphas, 1.0)
    return np.log(g) - np.log(g.sum(axis=1, keepdims=True))


def _estimate(values):
    values = np.asarray(values)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def mc_expected_entropy(q: SecondOrder, n: int, rng_seed):
    """Monte-Carlo ``(estimate, standard error)`` of ``E[H(theta)]``."""
    log_theta = _mixture_log_samples(q, n, np.random.default_rng(rng_seed))
    theta = np.exp(log_theta)
    return _estimate(-np.sum(theta * log_theta, axis=1))


def mc_differential_entropy(q: SecondOrder, n: int, rng_seed):
    """Monte-Carlo ``(estimate, standard error)`` of ``-E[log q(theta)]``."""
    log_theta = _mixture_log_samples(q, n, np.random.default_rng(rng_seed))
    return _estimate(-_log_density(q, log_theta))


def mc_uce(d: Dirichlet, label: int, n: int, rng_seed):
    log_theta = _log_dirichlet_samples(d.alpha, n, np.random.default_rng(rng_seed))
    return _estimate(-log_theta[:, label])


def mc_mean(q: SecondOrder, n: int, rng_seed):
    """Per-class ``(estimate, standard error)`` arrays of the mean."""
    draws = sample(q, rng_seed, n)
    return draws.mean(axis=0), draws.std(axis=0, ddof=1) / math.sqrt(n)


def as_mixture(components: Sequence, weights=None) -> DirichletMixture:
    weights = np.full(len(components), 1.0 / len(components)) if weights is None else weights
    return DirichletMixture(np.asarray(weights, dtype=np.float64), tuple(components))
