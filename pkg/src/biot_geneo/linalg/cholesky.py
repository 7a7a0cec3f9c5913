"""Exact and zero-fill incomplete sparse Cholesky factorizations."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from ._backend import BACKEND, get_kernels
from .sparse import as_csr, is_symmetric


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a factorization meets a non-positive pivot."""

    def __init__(self, msg, pivot=None):
        super().__init__(msg)
        self.pivot = pivot


@dataclass(frozen=True)
class CholeskyFactor:
    """``P A Pᵀ ≈ L Lᵀ`` with ``L`` lower triangular in CSC layout.

    ``perm`` maps new positions to original indices, i.e. the factored
    matrix is ``A[perm][:, perm]``.
    """

    L: sp.csc_matrix
    perm: np.ndarray
    exact: bool = True
    shift: float = 0.0
    backend: str = BACKEND

    @property
    def n(self):
        return self.L.shape[0]

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise ValueError(f"rhs has {b.shape[0]} rows, factor is {self.n}x{self.n}")
        k = get_kernels(self.backend)
        Lp, Li, Lx = self.L.indptr, self.L.indices, self.L.data
        if b.ndim == 1:
            x = np.ascontiguousarray(b[self.perm])
            k.llt_solve(Lp, Li, Lx, x)
            out = np.empty_like(x)
            out[self.perm] = x
            return out
        out = np.empty_like(b)
        for j in range(b.shape[1]):
            out[:, j] = self.solve(b[:, j])
        return out

    def lower(self):
        """L in the original (unpermuted) numbering: A ≈ M Mᵀ with M = Pᵀ L."""
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.n)
        return self.L.tocsr()[inv]


def _factor_csc(L_indptr, L_indices, L_data, n):
    L = sp.csc_matrix((L_data, L_indices, L_indptr), shape=(n, n))
    L.indptr = L.indptr.astype(np.int64, copy=False)
    L.indices = L.indices.astype(np.int64, copy=False)
    return L


def _check_square_symmetric(A):
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if not is_symmetric(A, rtol=1e-10):
        raise ValueError("matrix is not symmetric")


def sparse_cholesky_factor(A, ordering="rcm", backend=None):
    """Exact sparse Cholesky factorization of an SPD matrix.

    ``ordering`` is ``"rcm"`` (reverse Cuthill-McKee) or ``"natural"``.
    Raises :class:`NotPositiveDefinite` on a non-positive pivot.
    """
    A = as_csr(A)
    _check_square_symmetric(A)
    n = A.shape[0]
    if ordering == "rcm":
        perm = reverse_cuthill_mckee(A, symmetric_mode=True).astype(np.int64)
    elif ordering == "natural":
        perm = np.arange(n, dtype=np.int64)
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    U = sp.triu(A[perm][:, perm], format="csc")
    U.sort_indices()
    kern = get_kernels(backend)
    Lp, Li, Lx, failed = kern.cholesky(
        n,
        U.indptr.astype(np.int64),
        U.indices.astype(np.int64),
        np.ascontiguousarray(U.data, dtype=np.float64),
    )
    if failed >= 0:
        raise NotPositiveDefinite(
            f"non-positive pivot at position {failed} (original index {perm[failed]})",
            pivot=int(perm[failed]),
        )
    name = backend if backend is not None else BACKEND
    return CholeskyFactor(_factor_csc(Lp, Li, Lx, n), perm, exact=True, backend=name)


def incomplete_cholesky_zero_fill(A, max_retries=8, backend=None):
    """IC(0): L restricted to the lower-triangular pattern of ``A``.

    On a breakdown the diagonal is shifted by ``1e-8·max|diag|``, growing
    100x per retry, before giving up.
    """
    A = as_csr(A)
    _check_square_symmetric(A)
    n = A.shape[0]
    diag = A.diagonal()
    if np.any(diag == 0.0):
        raise ValueError("IC(0) needs a nonzero diagonal")
    low = sp.tril(A, format="csr")
    low.sort_indices()
    Rp = low.indptr.astype(np.int64)
    Rj = low.indices.astype(np.int64)
    base = np.ascontiguousarray(low.data, dtype=np.float64)
    diag_pos = Rp[1:] - 1
    kern = get_kernels(backend)
    unit = 1e-8 * np.abs(diag).max()
    shift = 0.0
    for attempt in range(max_retries + 1):
        vals = base.copy()
        vals[diag_pos] += shift
        Lx, failed = kern.ic0_numeric(n, Rp, Rj, vals)
        if failed < 0:
            L = sp.csr_matrix((Lx, Rj, Rp), shape=(n, n)).tocsc()
            L.sort_indices()
            name = backend if backend is not None else BACKEND
            return CholeskyFactor(
                _factor_csc(L.indptr, L.indices, L.data, n),
                np.arange(n, dtype=np.int64),
                exact=False,
                shift=shift,
                backend=name,
            )
        shift = unit * 100.0**attempt
    raise NotPositiveDefinite(f"IC(0) broke down at row {failed} after {max_retries} shifts", pivot=int(failed))
