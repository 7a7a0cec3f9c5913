"""GenEO coarse spaces and one/two-level overlapping Schwarz preconditioners."""

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import lapack

from .decomposition import local_operator
from .linalg import as_csr, dense_generalized_symmetric_eig, sparse_cholesky_factor

log = logging.getLogger(__name__)

VARIANTS = ("one-level", "additive", "hybrid")


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def local_geneo_eigenpairs(decomposition, i, A, count=None):
    """Smallest finite eigenpairs of ``A_i′ y = λ D_i A_i′ D_i y``.

    Returns ``(lam, Y)``, ascending, with ``Y`` in local coordinates.
    """
    Ai = local_operator(decomposition, i, A)
    d = decomposition.owned[i].astype(np.float64)
    Bi = Ai * np.outer(d, d)
    return dense_generalized_symmetric_eig(Ai, Bi, count=count)


@dataclass
class CoarseSpace:
    eigenvalues: list
    eigenvectors: list
    W: list
    P: sp.csc_matrix
    E_factor: tuple  # scipy cho_factor output, or None when empty
    dropped: int = 0

    @property
    def size(self):
        return self.P.shape[1]

    def apply_Q(self, r):
        """``Q r = P (PᵀAP)⁻¹ Pᵀ r``."""
        if self.size == 0:
            return np.zeros_like(r)
        return self.P @ sla.cho_solve(self.E_factor, self.P.T @ r)


def build_coarse_space(decomposition, A, nev=None, tau=None, threads=1):
    """Deflation matrix and factorized Galerkin operator.

    Exactly one of ``nev`` (fixed count per subdomain) and ``tau``
    (keep ``λ < τ``) selects the eigenvectors.
    """
    if (nev is None) == (tau is None):
        raise ValueError("give exactly one of nev and tau")
    A = as_csr(A)
    N = decomposition.n_subdomains

    def solve(i):
        if nev is not None:
            k = min(nev, len(decomposition.dofs[i]))
            if k == 0:
                return np.zeros(0), np.zeros((len(decomposition.dofs[i]), 0))
            return local_geneo_eigenpairs(decomposition, i, A, count=k)
        lam, Y = local_geneo_eigenpairs(decomposition, i, A)
        keep = lam < tau
        return lam[keep], Y[:, keep]

    pairs = _map(solve, range(N), threads)
    eigvals = [p[0] for p in pairs]
    eigvecs = [p[1] for p in pairs]
    W = [decomposition.owned[i][:, None] * eigvecs[i] for i in range(N)]

    rows, cols, vals = [], [], []
    c0 = 0
    for i in range(N):
        Wi = W[i]
        r, c = np.nonzero(Wi)
        rows.append(decomposition.dofs[i][r])
        cols.append(c + c0)
        vals.append(Wi[r, c])
        c0 += Wi.shape[1]
    n_c = c0
    if n_c == 0:
        P = sp.csc_matrix((decomposition.n_free, 0))
        return CoarseSpace(eigvals, eigvecs, W, P, None)
    P = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(decomposition.n_free, n_c),
    )
    E = np.asarray((P.T @ (A @ P)).todense())
    E = 0.5 * (E + E.T)
    tol = 1e-10 * np.trace(E) / n_c
    _, piv, rank, info = lapack.dpstrf(E.copy(), lower=1, tol=tol)
    dropped = 0
    if rank < n_c:
        keep = np.sort(piv[:rank] - 1)
        dropped = n_c - rank
        warnings.warn(f"coarse operator rank deficient; dropped {dropped} of {n_c} columns", RuntimeWarning)
        P = P[:, keep]
        E = E[np.ix_(keep, keep)]
    factor = sla.cho_factor(E, lower=True)
    return CoarseSpace(eigvals, eigvecs, W, P.tocsc(), factor, dropped)


class SchwarzPreconditioner:
    """Overlapping Schwarz on the free displacement DOFs.

    ``variant``: ``"one-level"`` applies ``M⁻¹ = Σ R̃_iᵀ (A_i′)⁻¹ R_i``;
    ``"additive"`` adds the coarse correction ``Q``; ``"hybrid"`` applies
    ``Q + M⁻¹(I − A Q)``. With ``restricted=False`` the prolongation uses
    ``R_iᵀ`` instead of ``R̃_iᵀ`` (symmetric one-level operator).
    """

    def __init__(self, A, decomposition, coarse=None, variant="hybrid", restricted=True, threads=1):
        if variant not in VARIANTS:
            raise ValueError(f"unknown Schwarz variant {variant!r}; expected one of {VARIANTS}")
        self.A = as_csr(A)
        self.decomposition = decomposition
        self.coarse = coarse
        self.variant = variant
        self.restricted = restricted
        self.threads = threads
        d = decomposition
        self.factors = _map(lambda i: sparse_cholesky_factor(self.A[d.dofs[i]][:, d.dofs[i]]), range(d.n_subdomains), threads)
        self._scatter = [
            (dofs[own], np.flatnonzero(own)) if restricted else (dofs, np.arange(len(dofs)))
            for dofs, own in zip(d.dofs, d.owned)
        ]

    @property
    def shape(self):
        n = self.decomposition.n_free
        return (n, n)

    def one_level(self, r):
        d = self.decomposition
        local = _map(lambda i: self.factors[i].solve(r[d.dofs[i]]), range(d.n_subdomains), self.threads)
        v = np.zeros_like(r)
        # fixed accumulation order keeps threaded runs reproducible
        for (target, pick), y in zip(self._scatter, local):
            v[target] += y[pick]
        return v

    def apply(self, r):
        r = np.asarray(r, dtype=np.float64)
        if self.variant == "one-level" or self.coarse is None or self.coarse.size == 0:
            return self.one_level(r)
        q = self.coarse.apply_Q(r)
        if self.variant == "additive":
            return q + self.one_level(r)
        return q + self.one_level(r - self.A @ q)

    __call__ = apply


def apply_schwarz(precond, r):
    return precond.apply(r)
