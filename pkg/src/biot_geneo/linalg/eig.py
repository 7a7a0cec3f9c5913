"""Dense symmetric-definite generalized eigenproblems with singular B."""

import numpy as np
import scipy.linalg as sla

from .cholesky import NotPositiveDefinite


def dense_generalized_symmetric_eig(A, B, count=None, cut=1e-12):
    """Finite eigenpairs of ``A v = λ B v`` for SPD ``A`` and PSD ``B``.

    Works on the inverted pencil: with ``A = L Lᵀ`` the eigenvalues ``μ`` of
    ``L⁻¹ B L⁻ᵀ`` are ``1/λ``, and directions in the null space of ``B``
    show up as ``μ = 0`` and are dropped (``μ ≤ cut·max μ``).

    Returns ``(lam, V)`` with ``lam`` ascending and ``Vᵀ A V = I``. When
    ``count`` is given only the ``count`` smallest ``λ`` are computed.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n):
        raise ValueError(f"shape mismatch: A {A.shape}, B {B.shape}")
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    try:
        L = sla.cholesky(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"A is not positive definite: {exc}") from None
    X = sla.solve_triangular(L, B, lower=True)
    C = sla.solve_triangular(L, X.T, lower=True)
    C = 0.5 * (C + C.T)
    if count is None or count >= n:
        mu, W = sla.eigh(C)
    elif count <= 0:
        return np.zeros(0), np.zeros((n, 0))
    else:
        mu, W = sla.eigh(C, subset_by_index=[n - count, n - 1])
    mu, W = mu[::-1], W[:, ::-1]
    if mu[0] <= 0.0:
        return np.zeros(0), np.zeros((n, 0))
    keep = mu > cut * mu[0]
    mu, W = mu[keep], W[:, keep]
    V = sla.solve_triangular(L, W, lower=True, trans="T")
    return 1.0 / mu, V
