"""Built-in oracles: Monte-Carlo measures, gradient checks, sparse vs dense.

Each check returns a :class:`CheckResult`; :func:`run` executes them all.
``quick`` lowers sample counts and trial numbers but keeps every seed
fixed, so results are deterministic either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from . import secondorder as so
from .diffmath import gradcheck
from .diffmath import tensor as T
from .models import graph as G
from .models.postnet import PostNetConfig, PostNetPredictor, feature_alphas_tensor
from .propagation import PprConfig, ppr_matrix, propagation_operator
from .sparse import SparseMatrix, check_row_stochastic

GRAD_RTOL = 1e-4


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


# fixtures -------------------------------------------------------------------


def figure1_distributions():
    """The three example distributions: a peaked Beta, the uniform Beta, a bimodal mixture."""
    q1 = so.Dirichlet([5.0, 5.0])
    q2 = so.Dirichlet([1.0, 1.0])
    q3 = so.as_mixture([so.Dirichlet([100.0, 10.0]), so.Dirichlet([10.0, 100.0])])
    return q1, q2, q3


def conflict_fixture() -> Tuple[SparseMatrix, np.ndarray, PprConfig]:
    """Two connected nodes with confident, opposing pseudo-counts."""
    adj = SparseMatrix.from_edges([(0, 1)], 2)
    alphas = np.array([[100.0, 1.0], [1.0, 100.0]])
    return adj, alphas, PprConfig(teleport_epsilon=0.5, power_iterations=1)


def six_node_fixture():
    """Small labeled graph with a tiny predictor for end-to-end gradient checks."""
    edges = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (2, 3)]
    adj = SparseMatrix.from_edges(edges, 6)
    rng = np.random.default_rng(7)
    features = np.concatenate([rng.normal(1.0, 0.3, (3, 3)), rng.normal(-1.0, 0.3, (3, 3))])
    labels = np.array([0, 0, 0, 1, 1, 1])
    mask = np.array([True, False, True, True, False, True])
    cfg = PostNetConfig(input_dim=3, n_classes=2, hidden_dim=4, latent_dim=2, flow_layers=2)
    predictor = PostNetPredictor.initialize(cfg, [0.5, 0.5], certainty_budget=6.0, seed=3)
    return adj, features, labels, mask, predictor


def random_graph(n: int, p: float, rng) -> SparseMatrix:
    upper = np.triu(rng.random((n, n)) < p, k=1)
    rows, cols = np.nonzero(upper)
    return SparseMatrix.from_edges(np.stack([rows, cols], axis=1), n)


def dense_ppr(adj: SparseMatrix, cfg: PprConfig) -> np.ndarray:
    """Dense oracle: the L-th power of the dense operator."""
    op = propagation_operator(adj, cfg).to_dense()
    return np.linalg.matrix_power(op, cfg.power_iterations)


def random_mixture(rng, max_classes=5, max_components=5) -> so.DirichletMixture:
    k = int(rng.integers(2, max_classes + 1))
    m = int(rng.integers(1, max_components + 1))
    comps = [so.Dirichlet(rng.uniform(0.5, 20.0, size=k)) for _ in range(m)]
    return so.DirichletMixture(rng.dirichlet(np.ones(m)), tuple(comps))


# gradient checks ------------------------------------------------------------


def _weights(shape, seed=0):
    return np.random.default_rng(seed).normal(size=shape)


def _away_from(x, point, gap=0.05):
    """Nudge entries away from a kink so finite differences stay one-sided-free."""
    x = np.array(x)
    close = np.abs(x - point) < gap
    x[close] += 2 * gap
    return x


def primitive_cases() -> Dict[str, Tuple[Callable, List[np.ndarray]]]:
    """Scalar test functions ``sum(W * op(x))`` with 100 input points per primitive."""
    rng = np.random.default_rng(11)
    sq = (10, 10)
    w = _weights(sq)
    x = rng.normal(size=sq)
    y = rng.normal(size=sq)
    pos = rng.uniform(0.2, 6.0, size=sq)
    pos_y = rng.uniform(0.5, 3.0, size=sq)
    sm = T.Tensor(w)

    def ws(t):
        return T.tsum(t * sm)

    adj = random_graph(10, 0.3, rng)
    op = propagation_operator(adj, PprConfig(teleport_epsilon=0.2, power_iterations=1))
    index = rng.integers(0, 10, size=14)
    return {
        "add": (lambda a, b: ws(a + b), [x, y]),
        "add_broadcast": (lambda a, b: ws(a + b), [x, y[:1]]),
        "sub": (lambda a, b: ws(a - b), [x, y]),
        "mul": (lambda a, b: ws(a * b), [x, y]),
        "div": (lambda a, b: ws(a / b), [x, pos_y]),
        "neg": (lambda a: ws(-a), [x]),
        "matmul": (lambda a, b: ws(a @ b), [x, y]),
        "exp": (lambda a: ws(T.exp(a)), [x]),
        "log": (lambda a: ws(T.log(a)), [pos]),
        "sqrt": (lambda a: ws(T.sqrt(a)), [pos]),
        "tanh": (lambda a: ws(T.tanh(a)), [x]),
        "relu": (lambda a: ws(T.relu(a)), [_away_from(x, 0.0)]),
        "softplus": (lambda a: ws(T.softplus(a)), [x]),
        "clip_max": (lambda a: ws(T.clip_max(a, 0.3)), [_away_from(x, 0.3)]),
        "lgamma": (lambda a: ws(T.lgamma(a)), [pos]),
        "digamma": (lambda a: ws(T.digamma(a)), [pos]),
        "sum_axis": (lambda a: T.tsum(T.tsum(a, axis=1) * T.Tensor(w[0])), [x]),
        "mean": (lambda a: T.tsum(T.mean(a, axis=0, keepdims=True) * T.Tensor(w[:1])), [x]),
        "logsumexp": (lambda a: T.tsum(T.logsumexp(a, axis=1) * T.Tensor(w[0])), [x]),
        "reshape": (lambda a: T.tsum(T.reshape(a, (100,)) * T.Tensor(w.reshape(-1))), [x]),
        "getitem": (lambda a: T.tsum(a[2:7] * T.Tensor(w[2:7])), [x]),
        "index_select": (lambda a: T.tsum(T.index_select(a, index, axis=0) * T.Tensor(_weights((14, 10), 1))), [x]),
        "concat": (lambda a, b: T.tsum(T.concat([a, b], axis=1) * T.Tensor(_weights((10, 20), 2))), [x, y]),
        "sparse_matmul": (lambda a: ws(T.sparse_matmul(op, a)), [x]),
    }


def check_primitive_gradients() -> List[CheckResult]:
    out = []
    for name, (fn, inputs) in primitive_cases().items():
        err = gradcheck.check(fn, inputs)
        out.append(CheckResult(f"grad:{name}", err <= GRAD_RTOL, f"max rel err {err:.2e}"))
    return out


def lop_loss_on_fixture(params, adj, features, labels, mask, predictor, entropy_weight=0.1):
    pi = ppr_matrix(adj, PprConfig(teleport_epsilon=0.3, power_iterations=3))
    alphas = feature_alphas_tensor(predictor, params, features)
    return G.loss_lop(alphas, pi, labels, mask, entropy_weight)


def check_lop_loss_gradient() -> List[CheckResult]:
    adj, features, labels, mask, predictor = six_node_fixture()
    err = gradcheck.check_dict(
        lambda p: lop_loss_on_fixture(p, adj, features, labels, mask, predictor), predictor.params
    )
    return [CheckResult("grad:lop_loss_6_nodes", err <= GRAD_RTOL, f"max rel err {err:.2e}")]


# Monte-Carlo oracles --------------------------------------------------------


def _within(value, est, se, k=3.0):
    return abs(value - est) <= k * se


def check_figure1(samples: int) -> List[CheckResult]:
    q1, q2, q3 = figure1_distributions()
    out = [
        CheckResult("fig1:tu_uniform", abs(so.tu(q2) - math.log(2)) <= 1e-9, f"{so.tu(q2):.12f}"),
        CheckResult("fig1:tu_bimodal", abs(so.tu(q3) - math.log(2)) <= 1e-9, f"{so.tu(q3):.12f}"),
    ]
    for name, q, closed in (("au_uniform", q2, 0.5), ("au_peaked", q1, sum(1 / k for k in range(6, 11)))):
        est, se = so.mc_expected_entropy(q, samples, rng_seed=1)
        ok = abs(so.au(q) - closed) <= 1e-9 and _within(closed, est, se)
        out.append(CheckResult(f"fig1:{name}", ok, f"closed {closed:.6f} mc {est:.6f}+-{se:.1e}"))
    return out


def check_mixture_au(trials: int, samples: int) -> List[CheckResult]:
    rng = np.random.default_rng(5)
    worst_lin, worst_z = 0.0, 0.0
    for t in range(trials):
        m = random_mixture(rng)
        linear = sum(w * so.au(c) for w, c in zip(m.weights, m.components))
        worst_lin = max(worst_lin, abs(so.au(m) - linear))
        est, se = so.mc_expected_entropy(m, samples, rng_seed=100 + t)
        worst_z = max(worst_z, abs(so.au(m) - est) / se)
    return [
        CheckResult("mixture:au_linear", bool(worst_lin <= 1e-12), f"max dev {worst_lin:.1e}"),
        CheckResult("mixture:au_monte_carlo", worst_z <= 3.0, f"max |z| {worst_z:.2f}"),
    ]


def check_entropy_sandwich(trials: int, samples: int) -> List[CheckResult]:
    rng = np.random.default_rng(6)
    failures = 0
    for t in range(trials):
        m = random_mixture(rng, max_classes=4, max_components=4)
        lower, upper = so.eu_so_bounds(m)
        est, se = so.mc_differential_entropy(m, samples, rng_seed=200 + t)
        failures += not (lower - 3 * se <= est <= upper + 3 * se)
    return [CheckResult("mixture:entropy_sandwich", failures == 0, f"{failures}/{trials} outside")]


def gpn_conflict_au_closed_form() -> float:
    """AU of Dir(50.5, 50.5) from harmonic sums, independent of the digamma code.

    ``psi(102) - psi(51.5) = H_101 + 2 ln 2 - 2 sum_{k<=51} 1/(2k-1)``.
    """
    harmonic = math.fsum(1.0 / k for k in range(1, 102))
    odd = math.fsum(1.0 / (2 * k - 1) for k in range(1, 52))
    return harmonic + 2.0 * math.log(2.0) - 2.0 * odd


def check_conflict() -> List[CheckResult]:
    adj, alphas, cfg = conflict_fixture()
    gpn = G.forward_gpn(alphas, adj, cfg)
    lop = G.forward_lop(alphas, adj, cfg)
    gpn_closed = gpn_conflict_au_closed_form()
    lop_closed = so.au(so.Dirichlet([100.0, 1.0]))
    gpn_ok = all(
        np.allclose(q.alpha, [50.5, 50.5], rtol=0, atol=1e-12)
        and abs(so.au(q) - gpn_closed) <= 1e-12
        and abs(so.eu_pc(q) + 101.0) <= 1e-9
        for q in gpn
    )
    lop_ok = all(abs(so.au(q) - lop_closed) <= 1e-12 and abs(so.au(q) - 0.0514) <= 1e-4 for q in lop)
    gap = [so.tu(q) - so.au(q) for q in lop]
    return [
        CheckResult("conflict:gpn", gpn_ok, f"au {[round(so.au(q), 6) for q in gpn]} closed {gpn_closed:.6f}"),
        CheckResult("conflict:lop", lop_ok and all(abs(g - 0.642) <= 1e-3 for g in gap), f"tu-au {np.round(gap, 4)}"),
    ]


# sparse vs dense ------------------------------------------------------------


def check_ppr_dense(trials: int) -> List[CheckResult]:
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 13))
        adj = random_graph(n, float(rng.uniform(0.1, 0.7)), rng)
        cfg = PprConfig(teleport_epsilon=float(rng.uniform(0.0, 1.0)), power_iterations=int(rng.integers(0, 11)))
        worst = max(worst, float(np.max(np.abs(ppr_matrix(adj, cfg).to_dense() - dense_ppr(adj, cfg)))))
    return [CheckResult("ppr:dense_oracle", bool(worst <= 1e-12), f"max abs dev {worst:.1e}")]


def check_ppr_sparsified(trials: int) -> List[CheckResult]:
    rng = np.random.default_rng(10)
    ok = True
    for _ in range(trials):
        n = int(rng.integers(2, 40))
        adj = random_graph(n, 0.3, rng)
        delta = float(rng.choice([0.01, 0.05, 0.1, 0.3]))
        pi = ppr_matrix(adj, PprConfig(teleport_epsilon=0.1, power_iterations=5, sparsify_delta=delta))
        try:
            check_row_stochastic(pi, atol=1e-9)
        except ValueError:
            ok = False
        ok &= bool(np.all(pi.row_nnz() <= 1 + 1 / delta))
    return [CheckResult("ppr:sparsified_rows", ok, f"{trials} graphs")]


def run(quick: bool = False) -> List[CheckResult]:
    samples = 20_000 if quick else 200_000
    trials = 10 if quick else 50
    results = []
    results += check_figure1(samples)
    results += check_mixture_au(trials, samples // 4)
    results += check_entropy_sandwich(trials // 2, samples // 4)
    results += check_conflict()
    results += check_primitive_gradients()
    results += check_lop_loss_gradient()
    results += check_ppr_dense(trials * 2)
    results += check_ppr_sparsified(trials)
    return results
