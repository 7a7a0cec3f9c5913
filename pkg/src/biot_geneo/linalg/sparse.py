"""Compressed-row sparse matrices.

Operators are plain ``scipy.sparse.csr_matrix`` objects kept in canonical
form (sorted column indices, no duplicates) with 64-bit index arrays so they
can be handed to the kernels without conversion.
"""

import numpy as np
import scipy.sparse as sp

from ._backend import get_kernels


def as_csr(A):
    """Canonical CSR copy of ``A`` with int64 indices."""
    A = sp.csr_matrix(A, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    A.indptr = A.indptr.astype(np.int64, copy=False)
    A.indices = A.indices.astype(np.int64, copy=False)
    return A


def from_triplets(rows, cols, vals, shape):
    """Assemble from coordinate triplets, summing duplicates."""
    rows = np.asarray(rows).ravel()
    cols = np.asarray(cols).ravel()
    vals = np.asarray(vals, dtype=np.float64).ravel()
    return as_csr(sp.coo_matrix((vals, (rows, cols)), shape=shape))


def identity(n):
    return as_csr(sp.identity(n, format="csr"))


def spmv(A, x, backend=None):
    """y = A x."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape} times vector {x.shape}")
    k = get_kernels(backend)
    return k.csr_matvec(
        A.indptr.astype(np.int64, copy=False),
        A.indices.astype(np.int64, copy=False),
        np.ascontiguousarray(A.data, dtype=np.float64),
        x,
    )


def is_symmetric(A, rtol=1e-12):
    A = sp.csr_matrix(A)
    scale = abs(A).max() if A.nnz else 0.0
    if scale == 0.0:
        return True
    d = A - A.T
    return (abs(d).max() if d.nnz else 0.0) <= rtol * scale
