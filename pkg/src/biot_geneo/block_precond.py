"""Block lower-triangular preconditioner for the twofold saddle-point system."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .decomposition import build_decomposition
from .geneo import SchwarzPreconditioner, build_coarse_space
from .linalg import (
    NotPositiveDefinite,
    as_csr,
    incomplete_cholesky_zero_fill,
    sparse_cholesky_factor,
)

DISPLACEMENT_SOLVERS = ("exact", "ic0", "oas1", "geneo-additive", "geneo-hybrid")


@dataclass(frozen=True)
class SchwarzConfig:
    partition: object = None
    mesh: object = None
    overlap: int = 1
    nev: int | None = 15
    tau: float | None = None
    restricted: bool = True
    threads: int = 1


class FreeDofSolver:
    """Wraps a solver on the free DOFs; identity rows of fixed DOFs pass through."""

    def __init__(self, inner, free, n):
        self.inner = inner
        self.free = free
        self.n = n

    def __call__(self, r):
        x = r.copy()
        x[self.free] = self.inner(r[self.free])
        return x


def schur_surrogate(system):
    """``-Ŝ = B1 diag(A_u)⁻¹ B1ᵀ + B2 diag(A_z)⁻¹ B2ᵀ + A_p``."""
    du = system.A_u.diagonal()
    dz = system.A_z.diagonal()
    S = (
        system.B1 @ sp.diags(1.0 / du) @ system.B1.T
        + system.B2 @ sp.diags(1.0 / dz) @ system.B2.T
        + system.A_p
    )
    return as_csr(S)


class BlockTriangularPreconditioner:
    """Forward substitution with ``T = [[A, 0], [B, Ŝ]]``.

    ``A = diag(Ã_u, A_z)`` where ``Ã_u`` is one application of the selected
    displacement solver and ``A_z`` is solved exactly.
    """

    def __init__(self, system, variant="geneo-hybrid", schwarz=None):
        if variant not in DISPLACEMENT_SOLVERS:
            raise ValueError(f"unknown displacement solver {variant!r}; expected one of {DISPLACEMENT_SOLVERS}")
        self.system = system
        self.variant = variant
        dm = system.dofmap
        self.schwarz = None
        self.decomposition = None
        if variant == "exact":
            f = sparse_cholesky_factor(system.A_u)
            self.solve_u = f.solve
        elif variant == "ic0":
            f = incomplete_cholesky_zero_fill(system.A_u)
            self.solve_u = f.solve
        else:
            cfg = schwarz or SchwarzConfig()
            if cfg.mesh is None or cfg.partition is None:
                raise ValueError("Schwarz variants need the mesh and partition in SchwarzConfig")
            free = dm.u_free
            A_free = as_csr(system.A_u[free][:, free])
            self.decomposition = build_decomposition(cfg.mesh, cfg.partition, dm, cfg.overlap)
            coarse = None
            level = "one-level"
            if variant != "oas1":
                coarse = build_coarse_space(self.decomposition, A_free, nev=cfg.nev if cfg.tau is None else None,
                                            tau=cfg.tau, threads=cfg.threads)
                level = "additive" if variant == "geneo-additive" else "hybrid"
            self.schwarz = SchwarzPreconditioner(
                A_free, self.decomposition, coarse, variant=level, restricted=cfg.restricted, threads=cfg.threads
            )
            self.solve_u = FreeDofSolver(self.schwarz, free, dm.n_u)
        self.solve_z = sparse_cholesky_factor(system.A_z).solve
        self.neg_schur = schur_surrogate(system)
        try:
            self.schur_factor = sparse_cholesky_factor(self.neg_schur)
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(f"-Ŝ is not SPD (sign or scaling error in the blocks): {exc}") from None

    @property
    def coarse(self):
        return None if self.schwarz is None else self.schwarz.coarse

    def apply_blocks(self, r_u, r_z, r_p):
        s = self.system
        x_u = self.solve_u(r_u)
        x_z = self.solve_z(r_z)
        # Ŝ x_p = r_p - B1 x_u - B2 x_z with Ŝ = -(-Ŝ)
        x_p = -self.schur_factor.solve(r_p - s.B1 @ x_u - s.B2 @ x_z)
        return x_u, x_z, x_p

    def apply(self, r):
        r_u, r_z, r_p = self.system.dofmap.split(np.asarray(r, dtype=np.float64))
        return np.concatenate(self.apply_blocks(r_u, r_z, r_p))

    __call__ = apply


def build_preconditioner(system, variant="geneo-hybrid", schwarz=None):
    return BlockTriangularPreconditioner(system, variant, schwarz)


def apply_preconditioner(T, r):
    return T.apply(r)
