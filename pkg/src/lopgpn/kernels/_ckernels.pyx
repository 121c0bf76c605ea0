# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR kernels. Mirrors ``_pykernels`` exactly in contract."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t idx_t


def spmm(const idx_t[::1] indptr, const idx_t[::1] indices,
         const double[::1] data, const double[:, ::1] b):
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t n_out = b.shape[1]
    out_arr = np.zeros((n_rows, n_out), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, p, c
    cdef idx_t k
    cdef double v
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            k = indices[p]
            v = data[p]
            for c in range(n_out):
                out[i, c] += v * b[k, c]
    return out_arr


def spspmm(const idx_t[::1] a_indptr, const idx_t[::1] a_indices,
           const double[::1] a_data, const idx_t[::1] b_indptr,
           const idx_t[::1] b_indices, const double[::1] b_data,
           Py_ssize_t n_cols):
    """Gustavson row-by-row product; output columns sorted, zeros dropped."""
    cdef Py_ssize_t n_rows = a_indptr.shape[0] - 1
    acc_arr = np.zeros(n_cols, dtype=np.float64)
    mark_arr = np.full(n_cols, -1, dtype=np.int64)
    cols_arr = np.empty(n_cols, dtype=np.int64)
    cdef double[::1] acc = acc_arr
    cdef idx_t[::1] mark = mark_arr
    cdef idx_t[::1] cols = cols_arr

    out_indptr_arr = np.zeros(n_rows + 1, dtype=np.int64)
    cdef idx_t[::1] out_indptr = out_indptr_arr
    cap = max(16, a_data.shape[0] + b_data.shape[0])
    out_indices_arr = np.empty(cap, dtype=np.int64)
    out_data_arr = np.empty(cap, dtype=np.float64)
    cdef idx_t[::1] out_indices = out_indices_arr
    cdef double[::1] out_data = out_data_arr

    cdef Py_ssize_t i, p, q, t, n_found, nnz = 0
    cdef idx_t k, j
    cdef double v
    for i in range(n_rows):
        n_found = 0
        for p in range(a_indptr[i], a_indptr[i + 1]):
            k = a_indices[p]
            v = a_data[p]
            for q in range(b_indptr[k], b_indptr[k + 1]):
                j = b_indices[q]
                if mark[j] != i:
                    mark[j] = i
                    acc[j] = v * b_data[q]
                    cols[n_found] = j
                    n_found += 1
                else:
                    acc[j] += v * b_data[q]
        cols_arr[:n_found].sort()
        if nnz + n_found > out_data.shape[0]:
            cap = max(2 * out_data.shape[0], nnz + n_found)
            out_indices_arr = np.resize(out_indices_arr, cap)
            out_data_arr = np.resize(out_data_arr, cap)
            out_indices = out_indices_arr
            out_data = out_data_arr
        for t in range(n_found):
            j = cols[t]
            if acc[j] != 0.0:
                out_indices[nnz] = j
                out_data[nnz] = acc[j]
                nnz += 1
        out_indptr[i + 1] = nnz
    return out_indptr_arr, out_indices_arr[:nnz].copy(), out_data_arr[:nnz].copy()


def sparsify_to_diagonal(const idx_t[::1] indptr, const idx_t[::1] indices,
                         const double[::1] data, double delta):
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t cap = data.shape[0] + n_rows
    out_indptr_arr = np.zeros(n_rows + 1, dtype=np.int64)
    out_indices_arr = np.empty(cap, dtype=np.int64)
    out_data_arr = np.empty(cap, dtype=np.float64)
    cdef idx_t[::1] out_indptr = out_indptr_arr
    cdef idx_t[::1] out_indices = out_indices_arr
    cdef double[::1] out_data = out_data_arr

    cdef Py_ssize_t i, p, nnz = 0
    cdef idx_t j
    cdef double moved, diag, v
    cdef bint diag_written
    for i in range(n_rows):
        moved = 0.0
        diag = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            if j == i:
                diag += v
            elif v < delta:
                moved += v
        diag += moved
        diag_written = False
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            if j > i and not diag_written:
                if diag != 0.0:
                    out_indices[nnz] = i
                    out_data[nnz] = diag
                    nnz += 1
                diag_written = True
            if j == i:
                if diag != 0.0:
                    out_indices[nnz] = i
                    out_data[nnz] = diag
                    nnz += 1
                diag_written = True
            elif v >= delta:
                out_indices[nnz] = j
                out_data[nnz] = v
                nnz += 1
        if not diag_written and diag != 0.0:
            out_indices[nnz] = i
            out_data[nnz] = diag
            nnz += 1
        out_indptr[i + 1] = nnz
    return out_indptr_arr, out_indices_arr[:nnz].copy(), out_data_arr[:nnz].copy()
