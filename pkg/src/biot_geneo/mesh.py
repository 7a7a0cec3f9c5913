"""Structured triangulations of the unit square and block partitions."""

from dataclasses import dataclass, field

import numpy as np

BOUNDARY = -1

# boundary sides, used as edge tags
LEFT, RIGHT, BOTTOM, TOP = "left", "right", "bottom", "top"


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh with edge connectivity.

    ``edges[e] = (v0, v1)`` with ``v0 < v1``; ``edge_tris[e] = (t_left, t_right)``
    where ``t_right`` is ``BOUNDARY`` on the domain boundary.
    ``tri_edges[t]`` lists the three edges of triangle ``t``.
    """

    n: int
    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_tris: np.ndarray
    tri_edges: np.ndarray
    boundary_tags: dict = field(default_factory=dict)
    # per-field boundary condition kinds, e.g. {"u": "dirichlet", "z": "normal-flux"}
    field_conditions: dict = field(default_factory=dict)

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def boundary_edges(self):
        return np.flatnonzero(self.edge_tris[:, 1] == BOUNDARY)

    def interior_edges(self):
        return np.flatnonzero(self.edge_tris[:, 1] != BOUNDARY)

    def boundary_vertices(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        tol = 1e-12
        return np.flatnonzero((x < tol) | (x > 1 - tol) | (y < tol) | (y > 1 - tol))

    def vertex_triangles(self):
        """CSR-style vertex → incident triangles map as ``(offsets, tris)``."""
        flat = self.triangles.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.n_vertices)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return offsets, order // 3


def _edge_tables(triangles, n_vertices):
    local = np.array([[0, 1], [1, 2], [2, 0]])
    pairs = triangles[:, local].reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)
    key = pairs[:, 0] * n_vertices + pairs[:, 1]
    uniq, first, inverse = np.unique(key, return_index=True, return_inverse=True)
    edges = pairs[first]
    tri_of = np.repeat(np.arange(len(triangles)), 3)
    edge_tris = np.full((len(uniq), 2), BOUNDARY, dtype=np.int64)
    # first occurrence (lowest triangle index) goes left
    order = np.argsort(inverse, kind="stable")
    sorted_e = inverse[order]
    sorted_t = tri_of[order]
    starts = np.flatnonzero(np.r_[True, sorted_e[1:] != sorted_e[:-1]])
    edge_tris[sorted_e[starts], 0] = sorted_t[starts]
    second = starts + 1
    has2 = second < len(sorted_e)
    has2[has2] = sorted_e[second[has2]] == sorted_e[starts[has2]]
    edge_tris[sorted_e[starts[has2]], 1] = sorted_t[second[has2]]
    tri_edges = inverse.reshape(-1, 3)
    return edges.astype(np.int64), edge_tris, tri_edges.astype(np.int64)


def unit_square_mesh(n):
    """``n × n`` grid of squares, each cut along its lower-left/upper-right diagonal."""
    if n < 1:
        raise ValueError(f"need at least one cell per side, got n={n}")
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g)  # row j = y index
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (i + (n + 1) * j).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    # both triangles of a square are adjacent in the numbering
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])
    edges, edge_tris, tri_edges = _edge_tables(triangles, len(vertices))

    tags = {}
    mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    for e in np.flatnonzero(edge_tris[:, 1] == BOUNDARY):
        x, y = mid[e]
        if x < 1e-12:
            tags[int(e)] = LEFT
        elif x > 1 - 1e-12:
            tags[int(e)] = RIGHT
        elif y < 1e-12:
            tags[int(e)] = BOTTOM
        else:
            tags[int(e)] = TOP
    return Mesh(
        n=n,
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_tris=edge_tris,
        tri_edges=tri_edges,
        boundary_tags=tags,
        # whole boundary is Γ_d for u and Γ_f for z
        field_conditions={"u": "dirichlet", "z": "normal-flux"},
    )


@dataclass(frozen=True)
class Partition:
    owner: np.ndarray
    kx: int
    ky: int

    @property
    def n_subdomains(self):
        return self.kx * self.ky

    def block_of(self, s):
        """(column, row) of subdomain ``s`` in the block grid."""
        return s % self.kx, s // self.kx

    def elements(self, s):
        return np.flatnonzero(self.owner == s)


def partition_structured(mesh, kx, ky):
    """Assign each triangle to the ``kx × ky`` block holding its centroid."""
    if kx < 1 or ky < 1 or mesh.n % kx or mesh.n % ky:
        raise ValueError(f"block counts ({kx}, {ky}) must divide n={mesh.n}")
    c = mesh.centroids()
    bx = np.minimum((c[:, 0] * kx).astype(np.int64), kx - 1)
    by = np.minimum((c[:, 1] * ky).astype(np.int64), ky - 1)
    return Partition(owner=bx + kx * by, kx=kx, ky=ky)
