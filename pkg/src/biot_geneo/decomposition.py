"""Overlapping subdomains for the displacement unknowns.

All index sets refer to the *free* displacement numbering, i.e. positions in
``dofmap.u_free``. For subdomain ``i``:

* ``dofs[i]`` lists the DOFs on the closure of the extended subdomain (this
  is ``R_i``); the local matrix is the principal submatrix, i.e. homogeneous
  Dirichlet conditions one vertex row beyond the extended element set;
* ``owned[i]`` masks the DOFs owned by ``i`` (this is ``R̃_i`` and the 0/1
  partition of unity ``D_i``).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Decomposition:
    n_free: int
    free: np.ndarray
    dofs: list
    owned: list
    elements: list
    overlap: int
    H: float

    @property
    def n_subdomains(self):
        return len(self.dofs)

    def restriction(self, i):
        """``R_i`` as a sparse 0/1 matrix (local × free)."""
        d = self.dofs[i]
        return sp.csr_matrix((np.ones(len(d)), (np.arange(len(d)), d)), shape=(len(d), self.n_free))

    def pou_weights(self, i):
        """Diagonal of ``D_i`` (integers 0/1)."""
        return self.owned[i].astype(np.int64)

    def partition_of_unity_sum(self):
        """``Σ R_iᵀ D_i R_i`` assembled with integer entries."""
        rows = np.concatenate([d[o] for d, o in zip(self.dofs, self.owned)])
        data = np.ones(len(rows), dtype=np.int64)
        return sp.coo_matrix((data, (rows, rows)), shape=(self.n_free, self.n_free), dtype=np.int64).tocsr()


def _grow(mesh, mask, layers):
    tri = mesh.triangles
    for _ in range(layers):
        touched = np.zeros(mesh.n_vertices, dtype=bool)
        touched[tri[mask].ravel()] = True
        mask = touched[tri].any(axis=1)
    return mask


def build_decomposition(mesh, partition, dofmap, overlap):
    """Extend each block of ``partition`` by ``overlap`` element layers."""
    if overlap < 1:
        raise ValueError(f"overlap must be at least one element layer, got {overlap}")
    tri = mesh.triangles
    nv = mesh.n_vertices
    free = dofmap.u_free
    gmap = np.full(dofmap.n_u, -1, dtype=np.int64)
    gmap[free] = np.arange(len(free))

    # vertex owner: lowest subdomain owning an incident element
    vowner = np.full(nv, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(vowner, tri.ravel(), np.repeat(partition.owner, 3))

    dofs, owned, elements = [], [], []
    for s in range(partition.n_subdomains):
        base = partition.owner == s
        if not base.any():
            raise ValueError(f"subdomain {s} owns no elements")
        ext = _grow(mesh, base, overlap)
        verts = np.unique(tri[ext].ravel())
        g = np.column_stack([2 * verts, 2 * verts + 1]).ravel()
        loc = gmap[g]
        keep = loc >= 0
        loc = loc[keep]
        if len(loc) == 0:
            raise ValueError(f"subdomain {s} has no free displacement DOFs")
        own = np.repeat(vowner[verts] == s, 2)[keep]
        order = np.argsort(loc)
        dofs.append(loc[order])
        owned.append(own[order])
        elements.append(np.flatnonzero(ext))
    H = 1.0 / max(partition.kx, partition.ky)
    return Decomposition(len(free), free, dofs, owned, elements, overlap, H)


def local_operator(decomposition, i, A):
    """Dense ``A_i′ = R_i A R_iᵀ`` for a matrix on the free DOFs."""
    d = decomposition.dofs[i]
    return A[d][:, d].toarray()
