"""P1-P1-P0 discretization of the three-field Biot system.

Unknown ordering inside each field:

* displacement ``u`` and flux ``z``: two DOFs per vertex, ``2v`` (x) and ``2v+1`` (y);
* pressure ``p``: one DOF per triangle.

After backward Euler the flux equation is scaled by ``Δt`` and the mass
balance by ``-Δt`` so that the block matrix

    [[A_u, 0,   B1ᵀ],
     [0,   A_z, B2ᵀ],
     [B1,  B2, -A_p]]

is symmetric, with ``A_z = Δt (κ⁻¹ z, w)``, ``B1 = -(∇·u, q)``,
``B2 = -Δt (∇·z, q)`` and ``A_p = (c₀/α)(p, q) + J(p, q)``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import as_csr, from_triplets
from .mesh import BOTTOM, LEFT, RIGHT, TOP

TWO_PI = 2.0 * np.pi

# Strang-Fix 6-point rule, exact for degree 4; barycentric points, weights sum to 1
_A, _B = 0.445948490915965, 0.091576213509771
_WA, _WB = 0.223381589678011, 0.109951743655322
QUAD6_BARY = np.array(
    [
        [_A, _A, 1 - 2 * _A],
        [_A, 1 - 2 * _A, _A],
        [1 - 2 * _A, _A, _A],
        [_B, _B, 1 - 2 * _B],
        [_B, 1 - 2 * _B, _B],
        [1 - 2 * _B, _B, _B],
    ]
)
QUAD6_W = np.array([_WA, _WA, _WA, _WB, _WB, _WB])

# edge-midpoint rule, exact for degree 2
QUAD_MID_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
QUAD_MID_W = np.full(3, 1.0 / 3.0)


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 1.0
    c0: float = 0.0
    dstab: float = 0.1
    dt: float = 0.0125
    t_end: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.c0 < 0.0:
            raise ValueError(f"c0 must be non-negative, got {self.c0}")
        if self.dstab <= 0.0:
            raise ValueError(f"dstab must be positive, got {self.dstab}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def n_steps(self):
        return max(1, int(round(self.t_end / self.dt)))


def lame_from_poisson(nu, E=1.0):
    """Lamé parameters ``(λ, μ)`` for Poisson ratio ``nu`` and Young's modulus ``E``."""
    nu = np.asarray(nu, dtype=np.float64)
    if np.any(nu < 0.0) or np.any(nu >= 0.5):
        raise ValueError("Poisson ratio must lie in [0, 0.5)")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    if lam.ndim == 0:
        return float(lam), float(mu)
    return lam, mu


@dataclass(frozen=True)
class MaterialField:
    """Per-triangle Poisson ratio and permeability (E = 1)."""

    nu: np.ndarray
    kappa: np.ndarray

    def __post_init__(self):
        if np.any(self.kappa <= 0.0):
            raise ValueError("permeability must be positive")
        if np.any(self.nu <= 0.0) or np.any(self.nu >= 0.5):
            raise ValueError("Poisson ratio must lie in (0, 0.5)")

    @classmethod
    def uniform(cls, n_triangles, nu, kappa):
        return cls(np.full(n_triangles, float(nu)), np.full(n_triangles, float(kappa)))

    @property
    def lame(self):
        return lame_from_poisson(self.nu)

    @property
    def lam(self):
        return self.lame[0]

    @property
    def mu(self):
        return self.lame[1]

    def is_uniform(self):
        return np.ptp(self.nu) == 0.0 and np.ptp(self.kappa) == 0.0


@dataclass(frozen=True)
class DofMap:
    n_u: int
    n_z: int
    n_p: int
    u_fixed: np.ndarray
    z_fixed: np.ndarray
    p_fixed: np.ndarray

    @property
    def size(self):
        return self.n_u + self.n_z + self.n_p

    @property
    def offsets(self):
        return (0, self.n_u, self.n_u + self.n_z, self.size)

    @property
    def u_free(self):
        return np.setdiff1d(np.arange(self.n_u), self.u_fixed)

    def split(self, x):
        a, b, c, _ = self.offsets
        return x[a:b], x[b:c], x[c:]


def build_dofmap(mesh, pin_pressure=True):
    """DOF numbering with the constrained sets of the unit-square test problem.

    ``u`` is fixed at every boundary vertex. Only the normal component of
    ``z`` is fixed (x on left/right, y on bottom/top; both at corners).
    With flux data on the whole boundary and no storage the pressure is only
    defined up to a constant, so one pressure DOF is pinned.
    """
    nv, nt = mesh.n_vertices, mesh.n_triangles
    bverts = mesh.boundary_vertices()
    u_fixed = np.sort(np.concatenate([2 * bverts, 2 * bverts + 1]))
    zx, zy = set(), set()
    for e, side in mesh.boundary_tags.items():
        verts = mesh.edges[e]
        if side in (LEFT, RIGHT):
            zx.update(int(v) for v in verts)
        elif side in (BOTTOM, TOP):
            zy.update(int(v) for v in verts)
    z_fixed = np.sort(np.array([2 * v for v in zx] + [2 * v + 1 for v in zy], dtype=np.int64))
    p_fixed = np.array([0], dtype=np.int64) if pin_pressure else np.zeros(0, dtype=np.int64)
    return DofMap(2 * nv, 2 * nv, nt, u_fixed.astype(np.int64), z_fixed, p_fixed)


def p1_geometry(mesh):
    """Areas and constant P1 basis gradients, shape ``(T, 3, 2)``."""
    area = mesh.signed_areas()
    if np.any(area <= 0.0):
        bad = np.flatnonzero(area <= 0.0)[0]
        raise ValueError(f"degenerate or inverted triangle {bad}")
    p = mesh.vertices[mesh.triangles]
    # grad φ_a = rot90(p_c - p_b) / (2|K|) for the edge opposite vertex a
    grads = np.empty((len(area), 3, 2))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        e = p[:, c] - p[:, b]
        grads[:, a, 0] = -e[:, 1]
        grads[:, a, 1] = e[:, 0]
    grads /= (2.0 * area)[:, None, None]
    return area, grads


def _vector_dofs(mesh):
    t = mesh.triangles
    dofs = np.empty((len(t), 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * t
    dofs[:, 1::2] = 2 * t + 1
    return dofs


def _scatter_square(dofs, ke, n):
    rows = np.repeat(dofs, dofs.shape[1], axis=1)
    cols = np.tile(dofs, (1, dofs.shape[1]))
    return from_triplets(rows, cols, ke.reshape(len(dofs), -1), (n, n))


def assemble_elasticity(mesh, material):
    """Stiffness of ``a(u, v) = ∫ 2μ ε(u):ε(v) + λ (∇·u)(∇·v)`` before constraints."""
    area, g = p1_geometry(mesh)
    lam, mu = material.lame
    lam = np.broadcast_to(lam, area.shape)
    mu = np.broadcast_to(mu, area.shape)
    T = len(area)
    # strain-displacement rows: ε_xx, ε_yy, γ_xy = 2ε_xy
    Bm = np.zeros((T, 3, 6))
    Bm[:, 0, 0::2] = g[:, :, 0]
    Bm[:, 1, 1::2] = g[:, :, 1]
    Bm[:, 2, 0::2] = g[:, :, 1]
    Bm[:, 2, 1::2] = g[:, :, 0]
    D = np.zeros((T, 3, 3))
    D[:, 0, 0] = D[:, 1, 1] = lam + 2 * mu
    D[:, 0, 1] = D[:, 1, 0] = lam
    D[:, 2, 2] = mu
    ke = area[:, None, None] * np.einsum("tki,tkl,tlj->tij", Bm, D, Bm)
    return _scatter_square(_vector_dofs(mesh), ke, 2 * mesh.n_vertices)


def scalar_p1_mass(mesh, weight=None):
    area, _ = p1_geometry(mesh)
    w = area if weight is None else area * weight
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    ke = w[:, None, None] * ref[None]
    return _scatter_square(mesh.triangles, ke, mesh.n_vertices)


def assemble_darcy_mass(mesh, material, dt=1.0):
    """Vector P1 mass matrix weighted by ``Δt/κ`` per element."""
    weight = dt / np.broadcast_to(material.kappa, (mesh.n_triangles,))
    m = scalar_p1_mass(mesh, weight)
    # interleave components: (2a, 2b) and (2a+1, 2b+1)
    return as_csr(sp.kron(m, sp.identity(2), format="csr"))


def assemble_div_couplings(mesh, dt):
    """``B1[K, j] = -∫_K ∇·φ_j`` and ``B2 = Δt · B1`` (same P1 vector space)."""
    area, g = p1_geometry(mesh)
    vals = np.empty((len(area), 6))
    vals[:, 0::2] = -area[:, None] * g[:, :, 0]
    vals[:, 1::2] = -area[:, None] * g[:, :, 1]
    rows = np.repeat(np.arange(len(area)), 6)
    shape = (mesh.n_triangles, 2 * mesh.n_vertices)
    B1 = from_triplets(rows, _vector_dofs(mesh).ravel(), vals.ravel(), shape)
    B2 = from_triplets(rows, _vector_dofs(mesh).ravel(), dt * vals.ravel(), shape)
    return B1, B2


def jump_penalty(mesh, dstab):
    """``J(p, q) = δ Σ_e |e|² [p][q]`` over interior edges (P0 jumps)."""
    inner = mesh.interior_edges()
    le = mesh.edge_lengths()[inner]
    k0, k1 = mesh.edge_tris[inner, 0], mesh.edge_tris[inner, 1]
    w = dstab * le**2
    rows = np.concatenate([k0, k1, k0, k1])
    cols = np.concatenate([k0, k1, k1, k0])
    vals = np.concatenate([w, w, -w, -w])
    n = mesh.n_triangles
    return from_triplets(rows, cols, vals, (n, n))


def assemble_pressure_block(mesh, params):
    """``A_p = (c₀/α) diag(|K|) + J``."""
    area, _ = p1_geometry(mesh)
    mass = sp.diags((params.c0 / params.alpha) * area)
    return as_csr(mass + jump_penalty(mesh, params.dstab))


# ---------------------------------------------------------------- analytic data


def exact_solution(x, t, lam, mu, kappa):
    """Manufactured fields at points ``x`` (shape ``(..., 2)``).

    Returns ``(u, z, p)`` with ``u, z`` of shape ``(..., 2)``. Coefficients
    may be scalars or arrays broadcasting against ``x[..., 0]``.
    """
    x = np.asarray(x, dtype=np.float64)
    X, Y = TWO_PI * x[..., 0], TWO_PI * x[..., 1]
    st = np.sin(TWO_PI * t)
    shape = np.stack([np.cos(X) * np.sin(Y), np.sin(X) * np.cos(Y)], axis=-1) * st
    cu = -1.0 / (4.0 * np.pi * (np.asarray(lam) + 2.0 * np.asarray(mu)))
    cz = -TWO_PI * np.asarray(kappa)
    u = cu[..., None] * shape if np.ndim(cu) else cu * shape
    z = cz[..., None] * shape if np.ndim(cz) else cz * shape
    p = np.sin(X) * np.sin(Y) * st
    return u, z, p


def source_g1(x, t, lam, mu, kappa):
    """Compatible mass source ``g₁ = ∇·(∂ₜu + z)``."""
    x = np.asarray(x, dtype=np.float64)
    ss = np.sin(TWO_PI * x[..., 0]) * np.sin(TWO_PI * x[..., 1])
    lam2mu = np.asarray(lam) + 2.0 * np.asarray(mu)
    return (TWO_PI / lam2mu) * ss * np.cos(TWO_PI * t) + 8.0 * np.pi**2 * np.asarray(kappa) * ss * np.sin(TWO_PI * t)


def boundary_flux_g2(x, normal, t, lam, mu, kappa):
    """``g₂ = z·n`` of the manufactured flux."""
    _, z, _ = exact_solution(x, t, lam, mu, kappa)
    return np.sum(z * np.asarray(normal), axis=-1)


def source_terms(x, t, lam, mu, kappa, normal=None):
    """``(g₁, g₂)``; ``g₂`` is only evaluated when a boundary normal is given."""
    g1 = source_g1(x, t, lam, mu, kappa)
    g2 = None if normal is None else boundary_flux_g2(x, normal, t, lam, mu, kappa)
    return g1, g2


def quad_points(mesh, bary):
    return np.einsum("qa,tad->tqd", bary, mesh.vertices[mesh.triangles])


class ManufacturedData:
    """Boundary traces and sources for the manufactured test problem.

    Element quantities use the element's own coefficients; vertex traces use
    the material of the lowest-numbered incident triangle. For uniform
    material this is the exact problem; for patterned material it is a
    well-posed surrogate used for iteration counts only.
    """

    def __init__(self, mesh, material):
        self.mesh = mesh
        lam, mu = material.lame
        T = mesh.n_triangles
        self.lam = np.broadcast_to(lam, (T,)).astype(np.float64)
        self.mu = np.broadcast_to(mu, (T,)).astype(np.float64)
        self.kappa = np.broadcast_to(material.kappa, (T,)).astype(np.float64)
        offsets, tris = mesh.vertex_triangles()
        first = tris[offsets[:-1]]
        self.vlam, self.vmu, self.vkappa = self.lam[first], self.mu[first], self.kappa[first]
        self._area, _ = p1_geometry(mesh)
        self._q6 = quad_points(mesh, QUAD6_BARY)

    def vertex_fields(self, t):
        u, z, _ = exact_solution(self.mesh.vertices, t, self.vlam, self.vmu, self.vkappa)
        return u, z

    def cell_pressure(self, t):
        """Element averages of ``p`` (6-point rule)."""
        _, _, p = exact_solution(self._q6, t, 0.0, 1.0, 1.0)
        return p @ QUAD6_W

    def g1_integrals(self, t):
        g = source_g1(self._q6, t, self.lam[:, None], self.mu[:, None], self.kappa[:, None])
        return self._area * (g @ QUAD6_W)

    def exact(self, x, t):
        """Exact fields with the mesh-average coefficients (uniform material)."""
        return exact_solution(x, t, self.lam.mean(), self.mu.mean(), self.kappa.mean())


class ZeroData:
    """Homogeneous data: zero sources, traces and pinned pressure."""

    def __init__(self, mesh):
        self.mesh = mesh

    def vertex_fields(self, t):
        z = np.zeros((self.mesh.n_vertices, 2))
        return z, z.copy()

    def cell_pressure(self, t):
        return np.zeros(self.mesh.n_triangles)

    def g1_integrals(self, t):
        return np.zeros(self.mesh.n_triangles)

    def exact(self, x, t):
        x = np.asarray(x)
        return np.zeros(x.shape), np.zeros(x.shape), np.zeros(x.shape[:-1])


# ---------------------------------------------------------------- systems


@dataclass
class State:
    u: np.ndarray
    z: np.ndarray
    p: np.ndarray

    @classmethod
    def zeros(cls, dofmap):
        return cls(np.zeros(dofmap.n_u), np.zeros(dofmap.n_z), np.zeros(dofmap.n_p))

    def vector(self):
        return np.concatenate([self.u, self.z, self.p])


@dataclass
class BlockSystem:
    """One time step's linear system, constraints already eliminated."""

    A_u: sp.csr_matrix
    A_z: sp.csr_matrix
    B1: sp.csr_matrix
    B2: sp.csr_matrix
    A_p: sp.csr_matrix
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    dofmap: DofMap

    @property
    def shape(self):
        n = self.dofmap.size
        return (n, n)

    def matrix(self):
        return as_csr(
            sp.bmat(
                [
                    [self.A_u, None, self.B1.T],
                    [None, self.A_z, self.B2.T],
                    [self.B1, self.B2, -self.A_p],
                ],
                format="csr",
            )
        )

    def rhs(self):
        return np.concatenate([self.f1, self.f2, self.f3])

    def matvec(self, x):
        u, z, p = self.dofmap.split(x)
        return np.concatenate(
            [
                self.A_u @ u + self.B1.T @ p,
                self.A_z @ z + self.B2.T @ p,
                self.B1 @ u + self.B2 @ z - self.A_p @ p,
            ]
        )


def _eliminate(K, fixed, signs):
    """Zero rows/columns ``fixed`` of symmetric ``K`` and put ``signs`` on the diagonal."""
    n = K.shape[0]
    keep = np.ones(n)
    keep[fixed] = 0.0
    Dk = sp.diags(keep)
    diag = np.zeros(n)
    diag[fixed] = signs
    return as_csr(Dk @ K @ Dk + sp.diags(diag))


class BiotDiscretization:
    """Assembled operators of one problem; produces per-step block systems.

    The matrix is assembled and constrained once (it does not change for a
    fixed ``Δt``); :meth:`system` builds only the right-hand side.
    """

    def __init__(self, mesh, material, params, dofmap=None, data=None):
        self.mesh = mesh
        self.material = material
        self.params = params
        self.dofmap = dofmap if dofmap is not None else build_dofmap(mesh)
        self.data = data if data is not None else ManufacturedData(mesh, material)
        dt = params.dt
        self.A_u_raw = assemble_elasticity(mesh, material)
        self.A_z_raw = assemble_darcy_mass(mesh, material, dt)
        self.B1_raw, self.B2_raw = assemble_div_couplings(mesh, dt)
        self.A_p_raw = assemble_pressure_block(mesh, params)

        dm = self.dofmap
        a, b, c, _ = dm.offsets
        K = as_csr(
            sp.bmat(
                [
                    [self.A_u_raw, None, self.B1_raw.T],
                    [None, self.A_z_raw, self.B2_raw.T],
                    [self.B1_raw, self.B2_raw, -self.A_p_raw],
                ],
                format="csr",
            )
        )
        self.fixed = np.concatenate([dm.u_fixed + a, dm.z_fixed + b, dm.p_fixed + c])
        self.fixed_signs = np.concatenate(
            [np.ones(len(dm.u_fixed) + len(dm.z_fixed)), -np.ones(len(dm.p_fixed))]
        )
        self._lift = as_csr(K[:, self.fixed])
        Kc = _eliminate(K, self.fixed, self.fixed_signs)
        self.blocks = (
            as_csr(Kc[a:b, a:b]),
            as_csr(Kc[b:c, b:c]),
            as_csr(Kc[c:, a:b]),
            as_csr(Kc[c:, b:c]),
            as_csr(-Kc[c:, c:]),
        )

    def fixed_values(self, t):
        dm = self.dofmap
        u, z = self.data.vertex_fields(t)
        uv = u.ravel()[dm.u_fixed]
        zv = z.ravel()[dm.z_fixed]
        pv = self.data.cell_pressure(t)[dm.p_fixed]
        return np.concatenate([uv, zv, pv])

    def rhs(self, state_prev, t):
        dm = self.dofmap
        alpha, dt = self.params.alpha, self.params.dt
        f1 = np.zeros(dm.n_u)
        f2 = np.zeros(dm.n_z)
        f3 = (
            self.B1_raw @ state_prev.u
            - self.A_p_raw @ state_prev.p
            - (dt / alpha) * self.data.g1_integrals(t)
        )
        f = np.concatenate([f1, f2, f3])
        g = self.fixed_values(t)
        f -= self._lift @ g
        f[self.fixed] = self.fixed_signs * g
        return f

    def system(self, state_prev, t):
        f1, f2, f3 = self.dofmap.split(self.rhs(state_prev, t))
        A_u, A_z, B1, B2, A_p = self.blocks
        return BlockSystem(A_u, A_z, B1, B2, A_p, f1, f2, f3, self.dofmap)

    def state_from_vector(self, x):
        u, z, p = self.dofmap.split(x)
        return State(u.copy(), z.copy(), p.copy())


def assemble_system(mesh, material, params, dofmap, state_prev, t_n, data=None):
    """Backward-Euler step system at ``t_n`` given the previous state."""
    return BiotDiscretization(mesh, material, params, dofmap, data).system(state_prev, t_n)


def error_norms(state, mesh, t, exact):
    """L² errors ``(e_u, e_z, e_p)`` with the edge-midpoint rule.

    ``exact(x, t)`` returns ``(u, z, p)`` at points ``x``.
    """
    area, _ = p1_geometry(mesh)
    xq = quad_points(mesh, QUAD_MID_BARY)
    u_ex, z_ex, p_ex = exact(xq, t)
    tri = mesh.triangles

    def p1_values(vec):
        v = vec.reshape(-1, 2)[tri]  # (T, 3, 2)
        return np.einsum("qa,tad->tqd", QUAD_MID_BARY, v)

    def l2(diff2):
        return float(np.sqrt(np.sum(area * (diff2 @ QUAD_MID_W))))

    e_u = l2(np.sum((p1_values(state.u) - u_ex) ** 2, axis=-1))
    e_z = l2(np.sum((p1_values(state.z) - z_ex) ** 2, axis=-1))
    e_p = l2((state.p[:, None] - p_ex) ** 2)
    return e_u, e_z, e_p
