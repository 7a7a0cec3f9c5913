"""Experiment drivers: material patterns, time loop, parameter sweeps, CSV reports."""

import csv
import logging
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .block_precond import SchwarzConfig, build_preconditioner
from .discretization import (
    BiotDiscretization,
    MaterialField,
    ModelParams,
    State,
    ZeroData,
    error_norms,
)
from .krylov import KrylovConfig, gmres
from .mesh import partition_structured, unit_square_mesh

log = logging.getLogger(__name__)

# compressible / strongly permeable vs almost incompressible / weakly permeable
MATERIAL_A = (0.3, 1e-2)
MATERIAL_B = (0.4999, 1e-9)
PATTERNS = ("uniform", "across", "along")
EXPERIMENTS = ("table1-left", "table1-right", "table2", "convergence", "single")

# reference iteration counts from the literature, reported next to ours
REF_WEAK_SCALING = {
    0.3: {4: 4, 9: 5, 16: 7, 25: 7, 36: 9, 49: 11, 64: 11},
    0.4999: {4: 6, 9: 9, 16: 12, 25: 14, 36: 17, 49: 19, 64: 20},
}
REF_OVERLAP = {0.3: {8: 52, 16: 59, 32: 60, 64: 78}, 0.4999: {8: 56, 16: 52, 32: 48, 64: 50}}
REF_PERMEABILITY = {
    0.3: {1.0: 51, 1e-1: 19, 1e-3: 7, 1e-5: 14, 1e-7: 16, 1e-9: 16},
    0.4999: {1.0: 43, 1e-1: 17, 1e-3: 9, 1e-5: 9, 1e-7: 14, 1e-9: 47},
}
REF_HETEROGENEOUS = {"across": 175, "along": 87}

COLUMNS = [
    "experiment", "pattern", "precond", "n", "N", "H/h", "delta/h", "H/delta", "nu", "kappa",
    "rtol", "steps", "max_iterations", "mean_iterations", "converged", "reference_iterations",
    "e_u", "e_z", "e_p", "wall_seconds",
]


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "single"
    n: int = 16
    kx: int = 2
    ky: int = 2
    overlap: int = 1
    nu: float = MATERIAL_A[0]
    kappa: float = MATERIAL_A[1]
    dstab: float = 0.1
    dt: float = 0.0125
    t_end: float = 0.25
    rtol: float = 1e-8
    deflation: int = 15
    tau: float | None = None
    precond: str = "geneo-hybrid"
    pattern: str = "uniform"
    threads: int = 1
    scale_down: bool = False
    csv: str | None = None
    max_iters: int = 1000
    restart: int = 200
    zero_data: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown material pattern {self.pattern!r}")
        if self.n < 1 or self.n % self.kx or self.n % self.ky:
            raise ValueError(f"subdomain grid {self.kx}x{self.ky} must divide n={self.n}")

    @property
    def n_subdomains(self):
        return self.kx * self.ky


def material_pattern(pattern, mesh, partition, a=MATERIAL_A, b=MATERIAL_B):
    """Per-element (ν, κ) for a uniform or subdomain-patterned medium.

    ``across``: checkerboard over the subdomain grid, ``a`` where the block
    indices ``i + j`` are even. ``along``: vertical stripes, ``a`` on even
    block columns. ``uniform`` uses ``a`` everywhere.
    """
    T = mesh.n_triangles
    if pattern == "uniform":
        return MaterialField.uniform(T, *a)
    bx = partition.owner % partition.kx
    by = partition.owner // partition.kx
    if pattern == "across":
        use_a = (bx + by) % 2 == 0
    elif pattern == "along":
        use_a = bx % 2 == 0
    else:
        raise ValueError(f"unknown material pattern {pattern!r}")
    nu = np.where(use_a, a[0], b[0])
    kappa = np.where(use_a, a[1], b[1])
    return MaterialField(nu.astype(np.float64), kappa.astype(np.float64))


def time_loop(config, reference_iterations=None, return_state=False):
    """Backward-Euler run from ``Δt`` to ``t_end``; one report row."""
    t0 = time.perf_counter()
    mesh = unit_square_mesh(config.n)
    partition = partition_structured(mesh, config.kx, config.ky)
    material = material_pattern(config.pattern, mesh, partition, a=(config.nu, config.kappa))
    params = ModelParams(dstab=config.dstab, dt=config.dt, t_end=config.t_end)
    data = ZeroData(mesh) if config.zero_data else None
    disc = BiotDiscretization(mesh, material, params, data=data)
    state = State.zeros(disc.dofmap)
    kcfg = KrylovConfig(rtol=config.rtol, max_iters=config.max_iters, restart=config.restart)
    schwarz = SchwarzConfig(
        partition=partition,
        mesh=mesh,
        overlap=config.overlap,
        nev=config.deflation if config.tau is None else None,
        tau=config.tau,
        threads=config.threads,
    )
    precond = None
    iterations = []
    converged = True
    steps = params.n_steps
    t = 0.0
    for step in range(1, steps + 1):
        t = step * params.dt
        system = disc.system(state, t)
        if precond is None:
            # matrix is step-independent for constant Δt
            precond = build_preconditioner(system, config.precond, schwarz)
        x, report = gmres(system.matvec, precond, system.rhs(), config=kcfg)
        iterations.append(report.iterations)
        if not report.converged:
            converged = False
            log.warning("step %d did not converge (residual %.3e)", step, report.final_residual)
        state = disc.state_from_vector(x)
    e_u, e_z, e_p = error_norms(state, mesh, t, disc.data.exact)
    hh = config.n // max(config.kx, config.ky)
    row = {
        "experiment": config.experiment,
        "pattern": config.pattern,
        "precond": config.precond,
        "n": config.n,
        "N": config.n_subdomains,
        "H/h": hh,
        "delta/h": config.overlap,
        "H/delta": hh / config.overlap,
        "nu": config.nu if config.pattern == "uniform" else "",
        "kappa": config.kappa if config.pattern == "uniform" else "",
        "rtol": config.rtol,
        "steps": steps,
        "max_iterations": max(iterations),
        "mean_iterations": float(np.mean(iterations)),
        "converged": converged,
        "reference_iterations": "" if reference_iterations is None else reference_iterations,
        "e_u": e_u,
        "e_z": e_z,
        "e_p": e_p,
        "wall_seconds": time.perf_counter() - t0,
    }
    log.info(
        "%s n=%d N=%d nu=%s kappa=%s pattern=%s: max its %d, mean %.1f",
        config.experiment, config.n, config.n_subdomains, row["nu"], row["kappa"],
        config.pattern, row["max_iterations"], row["mean_iterations"],
    )
    if return_state:
        return row, state
    return row


class ExperimentReport:
    """Ordered collection of result rows."""

    def __init__(self, name, rows=None):
        self.name = name
        self.rows = list(rows or [])

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def append(self, row):
        self.rows.append(row)

    @property
    def all_converged(self):
        return all(r["converged"] for r in self.rows)

    def column(self, key):
        return [r[key] for r in self.rows]

    def to_csv(self, path_or_file):
        def fmt(v):
            if isinstance(v, bool):
                return "1" if v else "0"
            if isinstance(v, float):
                return f"{v:.6g}"
            return str(v)

        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            cols = COLUMNS + sorted({k for r in self.rows for k in r} - set(COLUMNS))
            w.writerow(cols)
            for r in self.rows:
                w.writerow([fmt(r.get(c, "")) for c in cols])
        finally:
            if own:
                fh.close()


def run_single(base):
    return ExperimentReport("single", [time_loop(base)])


def run_table1_left(base, ks=range(2, 9)):
    """Weak scaling: H/h = 8, δ/h = 1, N = k² for k = 2..8, both regimes."""
    report = ExperimentReport("table1-left")
    for nu, kappa in (MATERIAL_A, MATERIAL_B):
        for k in ks:
            cfg = replace(base, experiment="table1-left", n=8 * k, kx=k, ky=k, overlap=1,
                          nu=nu, kappa=kappa, pattern="uniform")
            report.append(time_loop(cfg, REF_WEAK_SCALING[nu].get(k * k)))
    return report


def run_table1_right(base, ratios=(8, 16, 32, 64)):
    """Overlap study at N = 16: δ/h ∈ {8, 4, 2, 1}.

    Full scale uses H/h = 64 (H/δ = 8..64); ``scale_down`` halves H/h while
    keeping the same overlaps, so H/δ becomes 4..32.
    """
    hh = 32 if base.scale_down else 64
    report = ExperimentReport("table1-right")
    for nu, kappa in (MATERIAL_A, MATERIAL_B):
        for ratio in ratios:
            overlap = 64 // ratio
            cfg = replace(base, experiment="table1-right", n=4 * hh, kx=4, ky=4, overlap=overlap,
                          nu=nu, kappa=kappa, pattern="uniform")
            ref = REF_OVERLAP[nu][ratio] if hh == 64 else None
            report.append(time_loop(cfg, ref))
    return report


def run_table2(base, kappas=(1.0, 1e-1, 1e-3, 1e-5, 1e-7, 1e-9)):
    """Permeability sweep and heterogeneous patterns at N = 16, H/h = 8."""
    report = ExperimentReport("table2")
    common = dict(experiment="table2", n=32, kx=4, ky=4, rtol=base.rtol)
    for nu in (MATERIAL_A[0], MATERIAL_B[0]):
        for kappa in kappas:
            cfg = replace(base, nu=nu, kappa=kappa, pattern="uniform", **common)
            report.append(time_loop(cfg, REF_PERMEABILITY[nu].get(kappa)))
    for pattern in ("across", "along"):
        cfg = replace(base, nu=MATERIAL_A[0], kappa=MATERIAL_A[1], pattern=pattern, **common)
        report.append(time_loop(cfg, REF_HETEROGENEOUS[pattern]))
    return report


def run_convergence(base, ns=(8, 16, 32, 64), dt_coarse=0.05):
    """Refinement study on the manufactured solution.

    ``Δt = dt_coarse · (8h)²`` so the first-order time error shrinks like the
    second-order displacement error; with ``Δt ∝ h`` it would mask it.
    """
    report = ExperimentReport("convergence")
    for n in ns:
        dt = dt_coarse * (8.0 / n) ** 2
        k = base.kx if n % base.kx == 0 else 1
        cfg = replace(base, experiment="convergence", n=n, kx=k, ky=k, dt=dt, pattern="uniform")
        report.append(time_loop(cfg))
    rows = report.rows
    for key in ("e_u", "e_z", "e_p"):
        rows[0][f"order_{key}"] = ""
        for a, b in zip(rows[:-1], rows[1:]):
            b[f"order_{key}"] = float(np.log2(a[key] / b[key]))
    return report


RUNNERS = {
    "single": run_single,
    "table1-left": run_table1_left,
    "table1-right": run_table1_right,
    "table2": run_table2,
    "convergence": run_convergence,
}


def run_experiment(config):
    return RUNNERS[config.experiment](config)


def config_dict(config):
    return asdict(config)
