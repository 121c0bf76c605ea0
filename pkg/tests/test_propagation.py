import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import path_graph
from lopgpn import propagation as P
from lopgpn.propagation import PprConfig
from lopgpn.selfcheck import dense_ppr, random_graph
from lopgpn.sparse import SparseMatrix, normalize_rw


def test_config_validation():
    for kw in (dict(teleport_epsilon=1.5), dict(power_iterations=-1), dict(sparsify_delta=1.0),
               dict(normalization="column")):
        with pytest.raises(ValueError):
            PprConfig(**kw)


def test_for_graph_enables_sparsification_for_large_graphs():
    assert PprConfig.for_graph(500).sparsify_delta is None
    assert PprConfig.for_graph(20_000).sparsify_delta == P.DEFAULT_DELTA
    assert PprConfig.for_graph(20_000, sparsify_delta=None).sparsify_delta is None


def test_a_eps_examples():
    a_hat = normalize_rw(path_graph(3))
    assert np.array_equal(P.a_eps(a_hat, PprConfig(teleport_epsilon=1.0)).to_dense(), np.eye(3))
    assert np.array_equal(P.a_eps(a_hat, PprConfig(teleport_epsilon=0.0)).to_dense(), a_hat.to_dense())
    half = P.a_eps(a_hat, PprConfig(teleport_epsilon=0.5)).to_dense()
    np.testing.assert_allclose(half, [[0.5, 0.5, 0], [0.25, 0.5, 0.25], [0, 0.5, 0.5]], atol=1e-15)


def test_propagate_dense_examples(backend):
    adj = path_graph(3)
    payload = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(P.propagate_dense(adj, payload, PprConfig(power_iterations=0)), payload)
    assert np.array_equal(P.propagate_dense(adj, payload, PprConfig(teleport_epsilon=1.0, power_iterations=7)),
                          payload)
    cfg = PprConfig(teleport_epsilon=0.5, power_iterations=2)
    op = np.array([[0.5, 0.5, 0], [0.25, 0.5, 0.25], [0, 0.5, 0.5]])
    np.testing.assert_allclose(P.propagate_dense(adj, np.eye(3), cfg), op @ op, rtol=0, atol=1e-15)
    with pytest.raises(ValueError, match="rows"):
        P.propagate_dense(adj, np.ones((4, 2)), cfg)


def test_ppr_matrix_examples(backend):
    adj = path_graph(3)
    assert np.array_equal(P.ppr_matrix(adj, PprConfig(power_iterations=0)).to_dense(), np.eye(3))
    sparse = P.ppr_matrix(adj, PprConfig(teleport_epsilon=0.5, power_iterations=1, sparsify_delta=0.3))
    assert sparse.row(1)[0].tolist() == [1] and sparse.row(1)[1].tolist() == [1.0]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.floats(0.05, 0.8), st.floats(0.0, 1.0), st.integers(0, 10), st.integers(0, 9999))
def test_ppr_matches_dense_power(n, p, eps, steps, seed):
    adj = random_graph(n, p, np.random.default_rng(seed))
    cfg = PprConfig(teleport_epsilon=eps, power_iterations=steps)
    pi = P.ppr_matrix(adj, cfg)
    np.testing.assert_allclose(pi.to_dense(), dense_ppr(adj, cfg), rtol=0, atol=1e-12)
    np.testing.assert_allclose(pi.to_dense(), P.propagate_dense(adj, np.eye(n), cfg), rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.floats(0.01, 0.9), st.floats(0.01, 0.99), st.integers(1, 8),
       st.sampled_from([0.01, 0.05, 0.2, 0.5]), st.integers(0, 9999))
def test_sparsified_ppr_properties(n, eps, p, steps, delta, seed):
    adj = random_graph(n, p, np.random.default_rng(seed))
    cfg = PprConfig(teleport_epsilon=eps, power_iterations=steps, sparsify_delta=delta)
    pi = P.ppr_matrix(adj, cfg)
    np.testing.assert_allclose(pi.row_sums(), 1.0, rtol=0, atol=1e-9)
    assert np.all(pi.row_nnz() <= 1 + 1 / delta)
    # self-teleport mass is never destroyed
    assert np.all(pi.diagonal() >= eps**steps * (1 - 1e-12))


def test_ppr_matches_between_backends():
    from lopgpn import kernels

    rng = np.random.default_rng(4)
    adj = random_graph(40, 0.1, rng)
    cfg = PprConfig(teleport_epsilon=0.2, power_iterations=6, sparsify_delta=0.01)
    results = []
    for name, module in sorted(kernels.available_backends().items()):
        saved = kernels.spspmm, kernels.sparsify_to_diagonal
        kernels.spspmm, kernels.sparsify_to_diagonal = module.spspmm, module.sparsify_to_diagonal
        try:
            results.append(P.ppr_matrix(adj, cfg).to_dense())
        finally:
            kernels.spspmm, kernels.sparsify_to_diagonal = saved
    for other in results[1:]:
        np.testing.assert_allclose(other, results[0], rtol=0, atol=1e-14)


def test_symmetric_operator_handles_isolated_nodes():
    adj = SparseMatrix.from_edges([(0, 1)], 3)
    op = P.propagation_operator(adj, PprConfig(normalization=P.SYMMETRIC, teleport_epsilon=0.0))
    assert op.to_dense()[2, 2] == 1.0
