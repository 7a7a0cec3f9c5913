"""Right-preconditioned restarted GMRES."""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)


class ArnoldiBreakdown(RuntimeError):
    pass


@dataclass(frozen=True)
class KrylovConfig:
    rtol: float = 1e-8
    max_iters: int = 1000
    restart: int = 200

    def __post_init__(self):
        if self.rtol <= 0:
            raise ValueError("rtol must be positive")
        if self.restart < 1:
            raise ValueError("restart length must be at least 1")


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    # relative residual after every Arnoldi step; index 0 and each restart
    # point hold the true residual
    history: list = field(default_factory=list)
    # index into ``history`` at which each restart cycle begins
    cycle_starts: list = field(default_factory=list)
    final_residual: float = np.nan


def _givens(a, b):
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def gmres(apply_A, apply_M, b, x0=None, config=None):
    """Solve ``A x = b`` with GMRES preconditioned on the right by ``M``.

    ``apply_A`` and ``apply_M`` are callables on 1-D arrays; ``apply_M`` may
    be ``None`` for no preconditioning. The reported residuals are
    ``‖b − A x‖/‖b‖``; convergence is always confirmed on the true residual.
    """
    config = config or KrylovConfig()
    M = apply_M if apply_M is not None else (lambda v: v)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    report = SolveReport()
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if bnorm == 0.0:
        report.converged = True
        report.history = [0.0]
        report.final_residual = 0.0
        return np.zeros(n), report

    r = b - apply_A(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    report.history.append(beta / bnorm)
    if beta / bnorm <= config.rtol:
        report.converged = True
        report.final_residual = beta / bnorm
        return x, report

    while report.iterations < config.max_iters:
        m = min(config.restart, config.max_iters - report.iterations)
        report.cycle_starts.append(len(report.history) - 1)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        V[0] = r / beta
        g[0] = beta
        k = 0
        for j in range(m):
            # copy: operators may return their input (e.g. identity), and w is updated in place
            w = np.array(apply_A(M(V[j])), dtype=np.float64)
            report.iterations += 1
            for i in range(j + 1):
                H[i, j] = np.dot(V[i], w)
                w -= H[i, j] * V[i]
            wnorm = np.linalg.norm(w)
            if wnorm > 0.0:
                overlap = V[: j + 1] @ w
                if np.max(np.abs(overlap)) > 1e-8 * wnorm:
                    w -= V[: j + 1].T @ overlap
                    H[: j + 1, j] += overlap
                    wnorm = np.linalg.norm(w)
            H[j + 1, j] = wnorm
            for i in range(j):
                H[i, j], H[i + 1, j] = (
                    cs[i] * H[i, j] + sn[i] * H[i + 1, j],
                    -sn[i] * H[i, j] + cs[i] * H[i + 1, j],
                )
            if H[j, j] == 0.0 and H[j + 1, j] == 0.0:
                # singular Hessenberg: the residual cannot be reduced any further
                rel = abs(g[j]) / bnorm
                if rel > config.rtol:
                    raise ArnoldiBreakdown(f"Arnoldi breakdown at step {j} with relative residual {rel:.3e}")
                break
            cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            rel = abs(g[j + 1]) / bnorm
            report.history.append(rel)
            k = j + 1
            if rel <= config.rtol:
                break
            if wnorm <= 1e-14 * max(beta, 1.0):
                # invariant subspace: residual should vanish
                if rel > config.rtol:
                    raise ArnoldiBreakdown(f"Arnoldi breakdown at step {j} with relative residual {rel:.3e}")
                break
            V[j + 1] = w / wnorm
        y = sla.solve_triangular(H[:k, :k], g[:k])
        x += M(V[:k].T @ y)
        r = b - apply_A(x)
        beta = np.linalg.norm(r)
        report.final_residual = beta / bnorm
        if beta / bnorm <= config.rtol:
            report.converged = True
            return x, report
        log.debug("gmres restart after %d iterations, true residual %.3e", report.iterations, beta / bnorm)
        if report.iterations < config.max_iters:
            # the next cycle starts from the true residual
            report.history.append(beta / bnorm)
    report.converged = report.final_residual <= config.rtol
    return x, report
