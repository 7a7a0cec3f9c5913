"""Compare the compiled kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--n 48] [--repeat 5]

Times sparse mat-vec, exact Cholesky, IC(0) and triangular solves on the
free displacement block of the elasticity operator, once per backend.
"""

import argparse
import timeit

import numpy as np

from biot_geneo.discretization import BiotDiscretization, MaterialField, ModelParams, State
from biot_geneo.linalg import (
    as_csr,
    available_backends,
    get_kernels,
    incomplete_cholesky_zero_fill,
    sparse_cholesky_factor,
)
from biot_geneo.mesh import unit_square_mesh


def elasticity_block(n):
    m = unit_square_mesh(n)
    disc = BiotDiscretization(m, MaterialField.uniform(m.n_triangles, 0.3, 1e-2), ModelParams())
    A = disc.system(State.zeros(disc.dofmap), 0.0125).A_u
    free = disc.dofmap.u_free
    return as_csr(A[free][:, free])


def bench(A, backend, repeat):
    k = get_kernels(backend)
    x = np.random.default_rng(0).standard_normal(A.shape[0])
    ip, ix, data = A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data
    chol = sparse_cholesky_factor(A, backend=backend)
    ic0 = incomplete_cholesky_zero_fill(A, backend=backend)
    cases = {
        "csr_matvec": lambda: k.csr_matvec(ip, ix, data, x),
        "cholesky": lambda: sparse_cholesky_factor(A, backend=backend),
        "ic0": lambda: incomplete_cholesky_zero_fill(A, backend=backend),
        "cholesky solve": lambda: chol.solve(x),
        "ic0 solve": lambda: ic0.solve(x),
    }
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in cases.items()}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=48, help="mesh cells per side")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    A = elasticity_block(args.n)
    print(f"elasticity block: {A.shape[0]} unknowns, {A.nnz} nonzeros")
    backends = available_backends()
    results = {b: bench(A, b, args.repeat) for b in backends}
    print(f"{'kernel':<16}" + "".join(f"{b:>14}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name in results[backends[0]]:
        times = [results[b][name] for b in backends]
        line = f"{name:<16}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times)
        if "cython" in results and "python" in results:
            line += f"{results['python'][name] / results['cython'][name]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
