# cython: language_level=3
"""Compiled inner loops for the sparse kernels.

All matrices arrive as raw CSR/CSC index arrays (int64) and float64 values.
Factors are stored column-wise (CSC) with the diagonal entry first in each
column and row indices ascending.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef cnp.int64_t idx_t


def csr_matvec(const idx_t[::1] indptr, const idx_t[::1] indices,
               const double[::1] data, const double[::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double acc
    y = np.empty(n, dtype=np.float64)
    cdef double[::1] yv = y
    with nogil:
        for i in range(n):
            acc = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                acc = acc + data[p] * x[indices[p]]
            yv[i] = acc
    return y


def etree(Py_ssize_t n, const idx_t[::1] Ap, const idx_t[::1] Ai):
    """Elimination tree from the upper triangle of a symmetric CSC matrix."""
    parent = np.full(n, -1, dtype=np.int64)
    cdef idx_t[::1] par = parent
    cdef idx_t[::1] anc = np.full(n, -1, dtype=np.int64)
    cdef Py_ssize_t k, p
    cdef idx_t i, inext
    with nogil:
        for k in range(n):
            for p in range(Ap[k], Ap[k + 1]):
                i = Ai[p]
                while i != -1 and i < k:
                    inext = anc[i]
                    anc[i] = k
                    if inext == -1:
                        par[i] = k
                    i = inext
    return parent


cdef inline Py_ssize_t _ereach(Py_ssize_t n, const idx_t[::1] Ap, const idx_t[::1] Ai,
                               Py_ssize_t k, const idx_t[::1] parent,
                               idx_t[::1] s, idx_t[::1] mark, idx_t[::1] stack) nogil:
    # nonzero pattern of row k of L (excluding k) in topological order s[top:n]
    cdef Py_ssize_t top = n, length, p
    cdef idx_t i
    mark[k] = k
    for p in range(Ap[k], Ap[k + 1]):
        i = Ai[p]
        if i > k:
            continue
        length = 0
        while mark[i] != k:
            stack[length] = i
            length += 1
            mark[i] = k
            i = parent[i]
        while length > 0:
            top -= 1
            length -= 1
            s[top] = stack[length]
    return top


def chol_symbolic(Py_ssize_t n, const idx_t[::1] Ap, const idx_t[::1] Ai,
                  const idx_t[::1] parent):
    """Column pointers of L for the up-looking factorization."""
    counts = np.ones(n, dtype=np.int64)
    cdef idx_t[::1] cnt = counts
    cdef idx_t[::1] s = np.empty(n, dtype=np.int64)
    cdef idx_t[::1] stack = np.empty(n, dtype=np.int64)
    cdef idx_t[::1] mark = np.full(n, -1, dtype=np.int64)
    cdef Py_ssize_t k, top
    with nogil:
        for k in range(n):
            top = _ereach(n, Ap, Ai, k, parent, s, mark, stack)
            while top < n:
                cnt[s[top]] += 1
                top += 1
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=Lp[1:])
    return Lp


def chol_numeric(Py_ssize_t n, const idx_t[::1] Ap, const idx_t[::1] Ai,
                 const double[::1] Ax, const idx_t[::1] parent,
                 const idx_t[::1] Lp):
    """Up-looking sparse Cholesky.

    Returns ``(Li, Lx, k)`` where ``k`` is -1 on success or the column at
    which a non-positive pivot appeared.
    """
    cdef Py_ssize_t nnz = Lp[n]
    Li_arr = np.empty(nnz, dtype=np.int64)
    Lx_arr = np.empty(nnz, dtype=np.float64)
    cdef idx_t[::1] Li = Li_arr
    cdef double[::1] Lx = Lx_arr
    cdef idx_t[::1] c = np.array(Lp[:n], dtype=np.int64)
    cdef double[::1] x = np.zeros(n, dtype=np.float64)
    cdef idx_t[::1] s = np.empty(n, dtype=np.int64)
    cdef idx_t[::1] stack = np.empty(n, dtype=np.int64)
    cdef idx_t[::1] mark = np.full(n, -1, dtype=np.int64)
    cdef Py_ssize_t k, p, top, q
    cdef idx_t i
    cdef double d, lki
    cdef Py_ssize_t failed = -1
    with nogil:
        for k in range(n):
            top = _ereach(n, Ap, Ai, k, parent, s, mark, stack)
            x[k] = 0.0
            for p in range(Ap[k], Ap[k + 1]):
                if Ai[p] <= k:
                    x[Ai[p]] = Ax[p]
            d = x[k]
            x[k] = 0.0
            while top < n:
                i = s[top]
                top += 1
                lki = x[i] / Lx[Lp[i]]
                x[i] = 0.0
                for q in range(Lp[i] + 1, c[i]):
                    x[Li[q]] -= Lx[q] * lki
                d -= lki * lki
                q = c[i]
                c[i] += 1
                Li[q] = k
                Lx[q] = lki
            if d <= 0.0:
                failed = k
                break
            q = c[k]
            c[k] += 1
            Li[q] = k
            Lx[q] = sqrt(d)
    return Li_arr, Lx_arr, failed


def ic0_numeric(Py_ssize_t n, const idx_t[::1] Rp, const idx_t[::1] Rj,
                const double[::1] Rx):
    """Zero-fill incomplete Cholesky on a lower-triangular CSR pattern.

    Each row must hold its diagonal as the last entry. Returns ``(Lx, k)``
    with ``k`` = -1 on success or the failing row.
    """
    Lx_arr = np.zeros(Rp[n], dtype=np.float64)
    cdef double[::1] Lx = Lx_arr
    cdef idx_t[::1] pos = np.full(n, -1, dtype=np.int64)
    cdef Py_ssize_t i, p, q, kk
    cdef idx_t k, j
    cdef double acc, d
    cdef Py_ssize_t failed = -1
    with nogil:
        for i in range(n):
            for p in range(Rp[i], Rp[i + 1]):
                pos[Rj[p]] = p
            for p in range(Rp[i], Rp[i + 1] - 1):
                k = Rj[p]
                acc = Rx[p]
                for q in range(Rp[k], Rp[k + 1] - 1):
                    j = Rj[q]
                    kk = pos[j]
                    if kk != -1 and kk < p:
                        acc -= Lx[kk] * Lx[q]
                Lx[p] = acc / Lx[Rp[k + 1] - 1]
            p = Rp[i + 1] - 1
            d = Rx[p]
            for q in range(Rp[i], p):
                d -= Lx[q] * Lx[q]
            for q in range(Rp[i], Rp[i + 1]):
                pos[Rj[q]] = -1
            if d <= 0.0:
                failed = i
                break
            Lx[p] = sqrt(d)
    return Lx_arr, failed


cdef void _lsolve(const idx_t[::1] Lp, const idx_t[::1] Li, const double[::1] Lx,
                  double[::1] x) nogil:
    cdef Py_ssize_t n = Lp.shape[0] - 1
    cdef Py_ssize_t j, p
    cdef double xj
    for j in range(n):
        xj = x[j] / Lx[Lp[j]]
        x[j] = xj
        for p in range(Lp[j] + 1, Lp[j + 1]):
            x[Li[p]] -= Lx[p] * xj


cdef void _ltsolve(const idx_t[::1] Lp, const idx_t[::1] Li, const double[::1] Lx,
                   double[::1] x) nogil:
    cdef Py_ssize_t n = Lp.shape[0] - 1
    cdef Py_ssize_t j, p
    cdef double acc
    for j in range(n - 1, -1, -1):
        acc = x[j]
        for p in range(Lp[j] + 1, Lp[j + 1]):
            acc -= Lx[p] * x[Li[p]]
        x[j] = acc / Lx[Lp[j]]


def lsolve(const idx_t[::1] Lp, const idx_t[::1] Li, const double[::1] Lx,
           double[::1] x):
    """In-place forward substitution with a CSC lower factor."""
    with nogil:
        _lsolve(Lp, Li, Lx, x)


def ltsolve(const idx_t[::1] Lp, const idx_t[::1] Li, const double[::1] Lx,
            double[::1] x):
    """In-place back substitution with the transpose of a CSC lower factor."""
    with nogil:
        _ltsolve(Lp, Li, Lx, x)


def llt_solve(const idx_t[::1] Lp, const idx_t[::1] Li, const double[::1] Lx,
              double[::1] x):
    with nogil:
        _lsolve(Lp, Li, Lx, x)
        _ltsolve(Lp, Li, Lx, x)


def cholesky(Py_ssize_t n, idx_t[::1] Ap, idx_t[::1] Ai, double[::1] Ax):
    """Factor a symmetric matrix given by (at least) its upper CSC triangle.

    Returns ``(Lp, Li, Lx, k)``; ``k`` is -1 on success.
    """
    parent = etree(n, Ap, Ai)
    Lp = chol_symbolic(n, Ap, Ai, parent)
    Li, Lx, failed = chol_numeric(n, Ap, Ai, Ax, parent, Lp)
    return Lp, Li, Lx, failed
