"""Pure-Python/numpy fallback for the compiled kernels.

Same call signatures as ``_ckernels``. The exact factorization goes through
LAPACK's banded Cholesky (``dpbtrf``) on the bandwidth of the already
reordered matrix, so the returned factor stores the full band.
"""

import numpy as np
from scipy.linalg import lapack


def csr_matvec(indptr, indices, data, x):
    n = len(indptr) - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=n).astype(np.float64)


def cholesky(n, Ap, Ai, Ax):
    cols = np.repeat(np.arange(n), np.diff(Ap))
    upper = Ai <= cols
    rows, cols, vals = Ai[upper], cols[upper], Ax[upper]
    bw = int((cols - rows).max()) if len(rows) else 0
    # lower band storage: ab[i - j, j] = A[i, j]
    ab = np.zeros((bw + 1, n))
    ab[cols - rows, rows] = vals
    cb, info = lapack.dpbtrf(ab, lower=1)
    if info > 0:
        return None, None, None, info - 1
    if info < 0:
        raise ValueError(f"dpbtrf: illegal argument {-info}")
    # band -> CSC, diagonal first in every column
    offs = np.arange(bw + 1)
    counts = np.minimum(bw + 1, n - np.arange(n))
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=Lp[1:])
    keep = offs[:, None] < counts[None, :]
    Li = (np.arange(n)[None, :] + offs[:, None]).T[keep.T].astype(np.int64)
    Lx = np.ascontiguousarray(cb.T)[keep.T]
    return Lp, Li, Lx, -1


def ic0_numeric(n, Rp, Rj, Rx):
    Lx = np.zeros(Rp[n])
    for i in range(n):
        start, diag = Rp[i], Rp[i + 1] - 1
        pos = {int(Rj[p]): p for p in range(start, diag + 1)}
        for p in range(start, diag):
            k = Rj[p]
            acc = Rx[p]
            for q in range(Rp[k], Rp[k + 1] - 1):
                kk = pos.get(int(Rj[q]))
                if kk is not None:
                    acc -= Lx[kk] * Lx[q]
            Lx[p] = acc / Lx[Rp[k + 1] - 1]
        d = Rx[diag] - np.dot(Lx[start:diag], Lx[start:diag])
        if d <= 0.0:
            return Lx, i
        Lx[diag] = np.sqrt(d)
    return Lx, -1


def lsolve(Lp, Li, Lx, x):
    for j in range(len(Lp) - 1):
        a, b = Lp[j], Lp[j + 1]
        x[j] /= Lx[a]
        x[Li[a + 1:b]] -= Lx[a + 1:b] * x[j]


def ltsolve(Lp, Li, Lx, x):
    for j in range(len(Lp) - 2, -1, -1):
        a, b = Lp[j], Lp[j + 1]
        x[j] = (x[j] - np.dot(Lx[a + 1:b], x[Li[a + 1:b]])) / Lx[a]


def llt_solve(Lp, Li, Lx, x):
    lsolve(Lp, Li, Lx, x)
    ltsolve(Lp, Li, Lx, x)
