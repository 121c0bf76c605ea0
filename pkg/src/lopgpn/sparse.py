"""Canonical CSR matrices and the graph operators built on them.

Dense operands are plain 2-D ``float64`` numpy arrays. Sparse matrices are
kept in canonical form: columns strictly increasing within each row, no
stored zeros, duplicates summed on construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

ROW_STOCHASTIC_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ro = np.asarray(self.row_offsets, dtype=np.int64)
        ci = np.asarray(self.col_indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "row_offsets", ro)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", vals)
        if ro.shape != (self.n_rows + 1,) or ro[0] != 0 or ro[-1] != len(ci):
            raise ValueError("row_offsets inconsistent with matrix shape")
        if len(ci) != len(vals):
            raise ValueError("col_indices and values differ in length")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n_cols):
            raise ValueError("column index out of range")
        same_row = np.repeat(np.arange(self.n_rows), np.diff(ro))
        same_row = same_row[1:] == same_row[:-1]
        if np.any(np.diff(ci)[same_row] <= 0):
            raise ValueError("column indices must be strictly increasing within each row")
        if np.any(vals == 0):
            raise ValueError("explicit zero values are not allowed")
        for arr in (ro, ci, vals):
            arr.setflags(write=False)

    # construction -------------------------------------------------------

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> SparseMatrix:
        """Build from triplets; duplicate (row, col) pairs are summed."""
        n_rows, n_cols = shape
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if len(rows) and (rows.min() < 0 or rows.max() >= n_rows):
            raise ValueError("row index out of range")
        if len(cols) and (cols.min() < 0 or cols.max() >= n_cols):
            raise ValueError("column index out of range")
        if len(rows) == 0:
            return cls.zeros(shape)
        indptr, indices, data = kernels._pykernels._compress(rows, cols, vals, n_rows, n_cols)
        return cls(n_rows, n_cols, indptr, indices, data)

    @classmethod
    def from_dense(cls, dense) -> SparseMatrix:
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(dense)
        return cls.from_coo(rows, cols, dense[rows, cols], dense.shape)

    @classmethod
    def zeros(cls, shape) -> SparseMatrix:
        n_rows, n_cols = shape
        return cls(n_rows, n_cols, np.zeros(n_rows + 1, np.int64), np.empty(0, np.int64), np.empty(0))

    @classmethod
    def identity(cls, n: int) -> SparseMatrix:
        return cls(n, n, np.arange(n + 1, dtype=np.int64), np.arange(n, dtype=np.int64), np.ones(n))

    @classmethod
    def from_edges(cls, edges, n_nodes: int) -> SparseMatrix:
        """Symmetric 0/1 adjacency from an undirected edge list (deduplicated)."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        m = cls.from_coo(rows, cols, np.ones(len(rows)), (n_nodes, n_nodes))
        return cls(n_nodes, n_nodes, m.row_offsets.copy(), m.col_indices.copy(), np.ones(m.nnz))

    # views --------------------------------------------------------------

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_offsets))

    def row(self, i: int):
        """(columns, values) stored in row ``i``."""
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.row_ids(), weights=self.values, minlength=self.n_rows)

    def diagonal(self) -> np.ndarray:
        rows = self.row_ids()
        on_diag = rows == self.col_indices
        out = np.zeros(min(self.shape))
        out[rows[on_diag]] = self.values[on_diag]
        return out

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_ids(), self.col_indices] = self.values
        return out

    def transpose(self) -> SparseMatrix:
        return SparseMatrix.from_coo(self.col_indices, self.row_ids(), self.values, (self.n_cols, self.n_rows))

    def is_symmetric(self) -> bool:
        t = self.transpose()
        return (
            self.shape == t.shape
            and np.array_equal(self.row_offsets, t.row_offsets)
            and np.array_equal(self.col_indices, t.col_indices)
            and np.array_equal(self.values, t.values)
        )

    def scale_rows(self, factors) -> SparseMatrix:
        factors = np.asarray(factors, dtype=np.float64)
        return SparseMatrix.from_coo(
            self.row_ids(), self.col_indices, self.values * factors[self.row_ids()], self.shape
        )

    def __repr__(self):
        return f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


def _require_square(m: SparseMatrix):
    if m.n_rows != m.n_cols:
        raise ValueError(f"expected a square matrix, got {m.n_rows}x{m.n_cols}")


def degrees(adjacency: SparseMatrix) -> np.ndarray:
    return adjacency.row_sums()


def add_self_loops(adjacency: SparseMatrix, only_isolated: bool = False) -> SparseMatrix:
    """Set diagonal entries to 1 (for every node, or only for isolated ones)."""
    _require_square(adjacency)
    n = adjacency.n_rows
    rows, cols, vals = adjacency.row_ids(), adjacency.col_indices, adjacency.values
    targets = np.flatnonzero(adjacency.row_nnz() == 0) if only_isolated else np.arange(n)
    off = rows != cols
    return SparseMatrix.from_coo(
        np.concatenate([rows[off], targets]),
        np.concatenate([cols[off], targets]),
        np.concatenate([vals[off], np.ones(len(targets))]),
        (n, n),
    )


def normalize_rw(adjacency: SparseMatrix, add_self_loops_to_isolated: bool = True) -> SparseMatrix:
    """Row-stochastic ``D^-1 A``.

    Isolated nodes get a unit self-loop when the flag is set; otherwise an
    isolated node is an error.
    """
    _require_square(adjacency)
    deg = degrees(adjacency)
    if np.any(deg == 0):
        if not add_self_loops_to_isolated:
            raise ValueError(f"isolated node {int(np.flatnonzero(deg == 0)[0])} in random-walk normalization")
        adjacency = add_self_loops(adjacency, only_isolated=True)
        deg = degrees(adjacency)
    return adjacency.scale_rows(1.0 / deg)


def normalize_sym(adjacency: SparseMatrix) -> SparseMatrix:
    """``D^-1/2 A D^-1/2``. Zero-degree nodes are an error."""
    _require_square(adjacency)
    deg = degrees(adjacency)
    if np.any(deg <= 0):
        raise ValueError(f"zero-degree node {int(np.flatnonzero(deg <= 0)[0])}; add self-loops first")
    inv_sqrt = 1.0 / np.sqrt(deg)
    rows, cols = adjacency.row_ids(), adjacency.col_indices
    # product in a fixed order keeps (i, j) and (j, i) bitwise equal
    vals = adjacency.values * (inv_sqrt[np.minimum(rows, cols)] * inv_sqrt[np.maximum(rows, cols)])
    return SparseMatrix(
        adjacency.n_rows, adjacency.n_cols, adjacency.row_offsets.copy(), cols.copy(), vals
    )


def spmm(a: SparseMatrix, b) -> np.ndarray:
    """Sparse times dense, cost proportional to ``nnz(a) * b.shape[1]``."""
    b = np.ascontiguousarray(b, dtype=np.float64)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    if b.ndim != 2 or a.n_cols != b.shape[0]:
        raise ValueError(f"shape mismatch: {a.shape} @ {b.shape}")
    out = kernels.spmm(a.row_offsets, a.col_indices, a.values, b)
    return out[:, 0] if vector else out


def spspmm(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    if a.n_cols != b.n_rows:
        raise ValueError(f"shape mismatch: {a.shape} @ {b.shape}")
    indptr, indices, data = kernels.spspmm(
        a.row_offsets, a.col_indices, a.values, b.row_offsets, b.col_indices, b.values, b.n_cols
    )
    return SparseMatrix(a.n_rows, b.n_cols, indptr, indices, data)


def check_row_stochastic(m: SparseMatrix, atol: float = ROW_STOCHASTIC_ATOL):
    if np.any(m.values < 0) or not np.allclose(m.row_sums(), 1.0, rtol=0.0, atol=atol):
        raise ValueError("matrix is not row-stochastic")


def sparsify_to_diagonal(m: SparseMatrix, delta: float) -> SparseMatrix:
    """Drop off-diagonal entries below ``delta``, returning their mass to the diagonal.

    Row sums are preserved and each row keeps at most ``1 + 1/delta`` entries.
    """
    _require_square(m)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    check_row_stochastic(m)
    indptr, indices, data = kernels.sparsify_to_diagonal(m.row_offsets, m.col_indices, m.values, float(delta))
    return SparseMatrix(m.n_rows, m.n_cols, indptr, indices, data)


def linear_combination(a: SparseMatrix, a_coef: float, b: SparseMatrix, b_coef: float) -> SparseMatrix:
    """``a_coef * a + b_coef * b`` in canonical form."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return SparseMatrix.from_coo(
        np.concatenate([a.row_ids(), b.row_ids()]),
        np.concatenate([a.col_indices, b.col_indices]),
        np.concatenate([a_coef * a.values, b_coef * b.values]),
        a.shape,
    )
