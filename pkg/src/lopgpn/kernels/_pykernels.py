"""Pure numpy implementations of the CSR kernels.

Used when the compiled extension is unavailable or when
``LOPGPN_PURE_PYTHON=1`` is set. Every function takes and returns raw CSR
arrays (int64 index arrays, float64 values) so both backends share one
calling convention.
"""

import numpy as np


def _row_ids(indptr):
    return np.repeat(np.arange(len(indptr) - 1, dtype=np.int64), np.diff(indptr))


def spmm(indptr, indices, data, b):
    n_rows = len(indptr) - 1
    out = np.zeros((n_rows, b.shape[1]), dtype=np.float64)
    if len(data) == 0:
        return out
    contrib = data[:, None] * b[indices]
    # reduceat over non-empty rows only; empty rows stay zero
    nonempty = np.flatnonzero(np.diff(indptr))
    out[nonempty] = np.add.reduceat(contrib, indptr[nonempty], axis=0)
    return out


def _compress(rows, cols, vals, n_rows, n_cols):
    """Sum duplicates, sort by (row, col), drop exact zeros."""
    key = rows * n_cols + cols
    order = np.argsort(key, kind="stable")
    key = key[order]
    vals = vals[order]
    uniq, start = np.unique(key, return_index=True)
    summed = np.add.reduceat(vals, start) if len(vals) else vals
    keep = summed != 0.0
    uniq = uniq[keep]
    summed = summed[keep]
    out_rows = uniq // n_cols
    out_cols = uniq % n_cols
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(out_rows, minlength=n_rows), out=indptr[1:])
    return indptr, out_cols.astype(np.int64), summed.astype(np.float64)


def spspmm(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data, n_cols):
    n_rows = len(a_indptr) - 1
    if len(a_data) == 0 or len(b_data) == 0:
        return np.zeros(n_rows + 1, dtype=np.int64), np.empty(0, np.int64), np.empty(0)
    a_rows = _row_ids(a_indptr)
    b_len = np.diff(b_indptr)[a_indices]
    # one output triple per (a entry, b entry in the matching row)
    rows = np.repeat(a_rows, b_len)
    a_vals = np.repeat(a_data, b_len)
    starts = np.repeat(b_indptr[a_indices], b_len)
    offsets = np.arange(len(rows)) - np.repeat(np.cumsum(b_len) - b_len, b_len)
    b_pos = starts + offsets
    return _compress(rows, b_indices[b_pos], a_vals * b_data[b_pos], n_rows, n_cols)


def sparsify_to_diagonal(indptr, indices, data, delta):
    n_rows = len(indptr) - 1
    rows = _row_ids(indptr)
    off_diag = indices != rows
    drop = off_diag & (data < delta)
    moved = np.bincount(rows[drop], weights=data[drop], minlength=n_rows)
    keep = ~drop
    rows_k = np.concatenate([rows[keep], np.arange(n_rows, dtype=np.int64)])
    cols_k = np.concatenate([indices[keep], np.arange(n_rows, dtype=np.int64)])
    vals_k = np.concatenate([data[keep], moved])
    return _compress(rows_k, cols_k, vals_k, n_rows, n_rows)
