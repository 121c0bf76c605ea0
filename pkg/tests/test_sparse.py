import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import path_graph, random_sparse, random_stochastic
from lopgpn import sparse as S
from lopgpn.sparse import SparseMatrix


def test_construction_canonicalizes_and_sums_duplicates():
    m = SparseMatrix.from_coo([1, 0, 1, 1], [2, 1, 0, 2], [1.0, 2.0, 3.0, 4.0], (2, 3))
    assert m.row_offsets.tolist() == [0, 1, 3]
    assert m.col_indices.tolist() == [1, 0, 2]
    assert m.values.tolist() == [2.0, 3.0, 5.0]


def test_explicit_zeros_are_dropped():
    m = SparseMatrix.from_coo([0, 0, 0], [0, 1, 1], [1.0, 2.0, -2.0], (1, 2))
    assert m.nnz == 1 and m.col_indices.tolist() == [0]


@pytest.mark.parametrize(
    "offsets, cols",
    [([0, 2], [1, 0]), ([0, 1], [5]), ([1, 1], [])],
)
def test_invalid_csr_rejected(offsets, cols):
    with pytest.raises(ValueError):
        SparseMatrix(1, 2, np.array(offsets), np.array(cols), np.ones(len(cols)))


def test_arrays_are_read_only():
    m = SparseMatrix.identity(3)
    with pytest.raises(ValueError):
        m.values[0] = 2.0


def test_from_edges_symmetric_and_deduplicated():
    m = SparseMatrix.from_edges([(0, 1), (1, 0), (1, 2)], 3)
    assert m.is_symmetric()
    assert m.to_dense().tolist() == [[0, 1, 0], [1, 0, 1], [0, 1, 0]]


def test_normalize_rw_examples():
    two = SparseMatrix.from_edges([(0, 1)], 2)
    assert S.normalize_rw(two).to_dense().tolist() == [[0, 1], [1, 0]]
    path = S.normalize_rw(path_graph(3)).to_dense()
    np.testing.assert_allclose(path, [[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]], rtol=0, atol=1e-15)
    single = S.normalize_rw(SparseMatrix.zeros((1, 1)), add_self_loops_to_isolated=True)
    assert single.to_dense().tolist() == [[1.0]]


def test_normalize_rw_errors():
    with pytest.raises(ValueError, match="isolated"):
        S.normalize_rw(SparseMatrix.zeros((2, 2)), add_self_loops_to_isolated=False)
    with pytest.raises(ValueError, match="square"):
        S.normalize_rw(SparseMatrix.zeros((2, 3)))


def test_normalize_sym_examples():
    two = SparseMatrix.from_edges([(0, 1)], 2)
    assert S.normalize_sym(two).to_dense().tolist() == [[0, 1], [1, 0]]
    path = S.normalize_sym(path_graph(3))
    assert path.to_dense()[1, 0] == pytest.approx(1 / np.sqrt(2), abs=1e-15)
    eye = S.normalize_sym(SparseMatrix.identity(4))
    assert np.array_equal(eye.to_dense(), np.eye(4))
    with pytest.raises(ValueError, match="zero-degree"):
        S.normalize_sym(SparseMatrix.zeros((2, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.floats(0.05, 0.9), st.integers(0, 10_000))
def test_normalization_properties(n, p, seed):
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < p, 1)
    adj = SparseMatrix.from_edges(np.argwhere(upper), n)
    rw = S.normalize_rw(adj)
    np.testing.assert_allclose(rw.row_sums(), 1.0, rtol=0, atol=1e-12)
    sym = S.normalize_sym(S.add_self_loops(adj, only_isolated=True))
    dense = sym.to_dense()
    assert np.array_equal(dense != 0, dense.T != 0)
    assert np.max(np.abs(dense - dense.T)) <= 1e-15


def test_spmm_examples(backend):
    b = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(S.spmm(SparseMatrix.identity(2), b), b)
    swap = SparseMatrix.from_dense([[0, 1], [1, 0]])
    assert S.spmm(swap, b).tolist() == [[3, 4], [1, 2]]
    assert S.spmm(swap, np.array([1.0, 2.0])).tolist() == [2.0, 1.0]
    with pytest.raises(ValueError, match="shape"):
        S.spmm(swap, np.ones((3, 2)))


def test_spspmm_examples(backend):
    rng = np.random.default_rng(0)
    s, dense = random_sparse(rng, 5, 5)
    assert np.array_equal(S.spspmm(SparseMatrix.identity(5), s).to_dense(), dense)
    p1, p2 = np.eye(4)[[2, 0, 3, 1]], np.eye(4)[[1, 3, 0, 2]]
    out = S.spspmm(SparseMatrix.from_dense(p1), SparseMatrix.from_dense(p2))
    assert np.array_equal(out.to_dense(), p1 @ p2)
    with pytest.raises(ValueError, match="shape"):
        S.spspmm(s, SparseMatrix.identity(3))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 8), st.floats(0.0, 1.0), st.integers(0, 10_000))
def test_products_match_dense_oracle(n, k, m, density, seed):
    rng = np.random.default_rng(seed)
    a, da = random_sparse(rng, n, k, density)
    b, db = random_sparse(rng, k, m, density)
    np.testing.assert_allclose(S.spmm(a, db), da @ db, rtol=0, atol=1e-12)
    c = S.spspmm(a, b)
    np.testing.assert_allclose(c.to_dense(), da @ db, rtol=0, atol=1e-12)
    for i in range(c.n_rows):
        cols, vals = c.row(i)
        assert np.all(np.diff(cols) > 0) and np.all(vals != 0)


def test_products_match_dense_oracle_both_backends(backend):
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, da = random_sparse(rng, 6, 6)
        b, db = random_sparse(rng, 6, 6)
        np.testing.assert_allclose(S.spspmm(a, b).to_dense(), da @ db, rtol=0, atol=1e-12)
        np.testing.assert_allclose(S.spmm(a, db), da @ db, rtol=0, atol=1e-12)


def test_sparsify_examples(backend):
    keep = SparseMatrix.from_dense([[0.5, 0.5], [0.5, 0.5]])
    assert np.array_equal(S.sparsify_to_diagonal(keep, 0.1).to_dense(), keep.to_dense())
    # the small entry is the diagonal itself: nothing to move
    diag_small = SparseMatrix.from_dense([[0.05, 0.95], [0.0, 1.0]])
    assert np.array_equal(S.sparsify_to_diagonal(diag_small, 0.1).to_dense(), diag_small.to_dense())
    moved = S.sparsify_to_diagonal(SparseMatrix.from_dense([[0.95, 0.05], [0.0, 1.0]]), 0.1)
    assert moved.to_dense().tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert moved.row_nnz().tolist() == [1, 1]


def test_sparsify_creates_missing_diagonal(backend):
    m = SparseMatrix.from_dense([[0.0, 0.95, 0.05], [0.3, 0.4, 0.3], [0.5, 0.5, 0.0]])
    out = S.sparsify_to_diagonal(m, 0.1).to_dense()
    np.testing.assert_allclose(out, [[0.05, 0.95, 0.0], [0.3, 0.4, 0.3], [0.5, 0.5, 0.0]], atol=1e-15)


def _sparsify_oracle(dense, delta):
    out = dense.copy()
    for i in range(len(out)):
        for j in range(len(out)):
            if i != j and 0 < out[i, j] < delta:
                out[i, i] += out[i, j]
                out[i, j] = 0.0
    return out


def test_sparsify_matches_scalar_oracle(backend):
    rng = np.random.default_rng(2)
    for _ in range(25):
        m, dense = random_stochastic(rng, 8)
        out = S.sparsify_to_diagonal(m, 0.2)
        np.testing.assert_allclose(out.to_dense(), _sparsify_oracle(dense, 0.2), rtol=0, atol=1e-12)
        np.testing.assert_allclose(out.row_sums(), 1.0, rtol=0, atol=1e-12)
        assert np.all(out.row_nnz() <= 1 + 1 / 0.2)
        off_before = np.count_nonzero(dense - np.diag(dense.diagonal()))
        off_after = np.count_nonzero(out.to_dense() - np.diag(out.diagonal()))
        assert off_after <= off_before


def test_sparsify_errors():
    m = SparseMatrix.identity(2)
    for delta in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError, match="delta"):
            S.sparsify_to_diagonal(m, delta)
    with pytest.raises(ValueError, match="row-stochastic"):
        S.sparsify_to_diagonal(SparseMatrix.from_dense([[0.5, 0.2], [0.0, 1.0]]), 0.1)


def test_transpose_and_linear_combination():
    rng = np.random.default_rng(3)
    a, da = random_sparse(rng, 4, 6)
    b, db = random_sparse(rng, 4, 6)
    assert np.array_equal(a.transpose().to_dense(), da.T)
    np.testing.assert_allclose(S.linear_combination(a, 2.0, b, -1.0).to_dense(), 2 * da - db, atol=1e-15)


def test_empty_matrices(backend):
    z = SparseMatrix.zeros((3, 3))
    assert S.spmm(z, np.ones((3, 2))).tolist() == [[0, 0]] * 3
    assert S.spspmm(z, SparseMatrix.identity(3)).nnz == 0
    e = SparseMatrix.zeros((0, 0))
    assert S.spmm(e, np.ones((0, 2))).shape == (0, 2)
