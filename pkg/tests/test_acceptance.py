"""Acceptance criteria; each test prints one PASS/FAIL line before asserting."""

from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from biot_geneo.block_precond import SchwarzConfig, build_preconditioner
from biot_geneo.decomposition import Decomposition, build_decomposition, local_operator
from biot_geneo.discretization import BiotDiscretization, ModelParams, State
from biot_geneo.geneo import SchwarzPreconditioner, build_coarse_space, local_geneo_eigenpairs
from biot_geneo.harness import (
    MATERIAL_A,
    MATERIAL_B,
    ExperimentConfig,
    material_pattern,
    run_convergence,
    run_table1_left,
    run_table2,
    time_loop,
)
from biot_geneo.krylov import KrylovConfig, gmres
from biot_geneo.linalg import as_csr, sparse_cholesky_factor
from biot_geneo.mesh import partition_structured, unit_square_mesh

DT = 0.0125
# iteration-count studies use one time step: the matrix is the same every step
ONE_STEP = ExperimentConfig(dt=DT, t_end=DT)
KAPPAS = (1.0, 1e-1, 1e-3, 1e-5, 1e-7, 1e-9)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
        return ok

    return emit


def build(n, k, overlap=1, pattern="uniform", nu=0.3, kappa=1e-2):
    m = unit_square_mesh(n)
    part = partition_structured(m, k, k)
    mat = material_pattern(pattern, m, part, a=(nu, kappa))
    disc = BiotDiscretization(m, mat, ModelParams(dt=DT, t_end=DT))
    system = disc.system(State.zeros(disc.dofmap), DT)
    return m, part, disc, system


def is_spd(A):
    try:
        sparse_cholesky_factor(as_csr(A))
    except (np.linalg.LinAlgError, ValueError):
        return False
    return True


# the H/h=8 scaling grid, the N=16 overlap grid and the one-subdomain mesh
POU_GRID = [(8 * k, k, 1) for k in range(2, 9)] + [(32, 4, d) for d in (1, 2, 4, 8)] + [(8, 1, 1)]
POU_GRID += [(128, 4, d) for d in (8, 4, 2, 1)]


def test_criterion_01_partition_of_unity(report):
    bad = []
    for n, k, overlap in POU_GRID:
        m, part, disc, _ = build(n, k)
        dec = build_decomposition(m, part, disc.dofmap, overlap)
        S = dec.partition_of_unity_sum()
        if S.dtype.kind != "i" or (S != sp.identity(dec.n_free, dtype=np.int64, format="csr")).nnz:
            bad.append((n, k, overlap))
    ok = report(1, "partition of unity is the integer identity", not bad, f"configs={len(POU_GRID)} bad={bad}")
    assert ok


SPD_GRID = (
    [(8 * k, k, 1, "uniform", nu, kappa) for k in range(2, 9) for nu, kappa in (MATERIAL_A, MATERIAL_B)]
    + [(32, 4, 1, "uniform", nu, kappa) for nu in (0.3, 0.4999) for kappa in KAPPAS]
    + [(32, 4, 1, p, *MATERIAL_A) for p in ("across", "along")]
    + [(32, 4, d, "uniform", *MATERIAL_A) for d in (2, 4, 8)]
)


def test_criterion_02_spd_certificates(report):
    failures = []
    worst_sym = 0.0
    for n, k, overlap, pattern, nu, kappa in SPD_GRID:
        m, part, disc, s = build(n, k, overlap, pattern, nu, kappa)
        K = s.matrix()
        worst_sym = max(worst_sym, abs(K - K.T).max() / abs(K).max())
        free = s.dofmap.u_free
        A_free = as_csr(s.A_u[free][:, free])
        # building the preconditioner factors A_z, -Ŝ, every A_i′ and PᵀAP
        try:
            T = build_preconditioner(s, "geneo-hybrid", SchwarzConfig(partition=part, mesh=m, overlap=overlap, nev=15))
        except np.linalg.LinAlgError as exc:
            failures.append((n, k, overlap, pattern, nu, kappa, str(exc)))
            continue
        cs = T.coarse
        E = (cs.P.T @ A_free @ cs.P).toarray()
        checks = {
            "A_u": is_spd(A_free),
            "A_z": is_spd(s.A_z),
            "-S": is_spd(T.neg_schur),
            "PtAP": bool(np.all(np.linalg.eigvalsh(E) > 0)),
            "A_i'": all(is_spd(A_free[d][:, d]) for d in T.decomposition.dofs),
        }
        if not all(checks.values()):
            failures.append((n, k, overlap, pattern, nu, kappa, [c for c, v in checks.items() if not v]))
    ok = not failures and worst_sym <= 1e-12
    report(2, "SPD certificates and global symmetry", ok,
           f"configs={len(SPD_GRID)} failures={failures} max_rel_asym={worst_sym:.1e}")
    assert ok


CORNERS = [(0.3, 1.0), (0.3, 1e-9), (0.4999, 1.0), (0.4999, 1e-9)]


def test_criterion_03_dense_oracle(report):
    errors = []
    for nu, kappa in CORNERS:
        m, part, disc, s = build(4, 2, nu=nu, kappa=kappa)
        x_dense = sla.solve(s.matrix().toarray(), s.rhs())
        T = build_preconditioner(s, "geneo-hybrid", SchwarzConfig(partition=part, mesh=m, overlap=1, nev=15))
        x, rep = gmres(s.matvec, T, s.rhs(), config=KrylovConfig(rtol=1e-8))
        errors.append(np.linalg.norm(x - x_dense) / np.linalg.norm(x_dense))
    ok = max(errors) <= 1e-6
    report(3, "n=4 dense solve matches GMRES + block-triangular", ok,
           "rel errors " + ", ".join(f"{e:.1e}" for e in errors))
    assert ok


@pytest.mark.slow
def test_criterion_04_manufactured_convergence(report):
    rep = run_convergence(ExperimentConfig(precond="exact"))
    e_u, e_p = rep.column("e_u"), rep.column("e_p")
    o_u, o_p = rep.column("order_e_u")[1:], rep.column("order_e_p")[1:]
    monotone = all(b < a for col in (e_u, rep.column("e_z"), e_p) for a, b in zip(col[:-1], col[1:]))
    ok = rep.all_converged and monotone and min(o_p) >= 0.8 and min(o_u) >= 1.6
    report(4, "manufactured-solution convergence", ok,
           "order e_u " + ", ".join(f"{o:.2f}" for o in o_u) + "; order e_p " + ", ".join(f"{o:.2f}" for o in o_p))
    assert ok


def nondecreasing_within_noise(counts, slack=0.1, floor=2):
    return all(b >= a - max(floor, slack * a) for a, b in zip(counts[:-1], counts[1:]))


@pytest.mark.slow
def test_criterion_05_scalability_trend(report):
    rep = run_table1_left(ONE_STEP)
    lines, ok = [], rep.all_converged
    for nu in (MATERIAL_A[0], MATERIAL_B[0]):
        rows = [r for r in rep if r["nu"] == nu]
        counts = [r["max_iterations"] for r in rows]
        ref = [r["reference_iterations"] for r in rows]
        growth = counts[-1] / counts[0]
        good = nondecreasing_within_noise(counts) and growth <= 3.0 and max(counts) <= 60
        ok = ok and good
        lines.append(f"nu={nu}: {counts} growth {growth:.2f} (reference {ref})")
    report(5, "iteration growth over N=4..64", ok, "; ".join(lines))
    assert ok


@pytest.fixture(scope="module")
def table2():
    return run_table2(replace(ONE_STEP, rtol=1e-10))


@pytest.mark.slow
def test_criterion_06_permeability_robustness(report, table2):
    lines, ok = [], True
    for nu in (MATERIAL_A[0], MATERIAL_B[0]):
        rows = [r for r in table2 if r["pattern"] == "uniform" and r["nu"] == nu]
        counts = {r["kappa"]: r["max_iterations"] for r in rows}
        good = all(r["converged"] for r in rows) and max(counts.values()) <= 120 and counts[1e-3] <= counts[1.0]
        ok = ok and good
        lines.append(f"nu={nu}: {[counts[k] for k in KAPPAS]} (reference {[r['reference_iterations'] for r in rows]})")
    report(6, "permeability sweep bounded with dip at kappa=1e-3", ok, "; ".join(lines))
    assert ok


@pytest.mark.slow
def test_criterion_07_heterogeneity(report, table2):
    rows = {r["pattern"]: r for r in table2 if r["pattern"] != "uniform"}
    ok = all(r["converged"] and r["max_iterations"] <= 400 for r in rows.values())
    report(7, "across/along patterns within 400 iterations", ok,
           ", ".join(f"{p} {r['max_iterations']} (reference {r['reference_iterations']})" for p, r in rows.items()))
    assert ok


@pytest.mark.slow
def test_criterion_08_coarse_space_effect(report, table2):
    across = replace(ONE_STEP, n=32, kx=4, ky=4, pattern="across", rtol=1e-10)
    hybrid = next(r for r in table2 if r["pattern"] == "across")["max_iterations"]
    one_level = time_loop(replace(across, precond="oas1"))["max_iterations"]
    # ν_i = 0: the two-level operator must reproduce one-level exactly
    m, part, disc, s = build(32, 4, pattern="across")
    free = s.dofmap.u_free
    A = as_csr(s.A_u[free][:, free])
    dec = build_decomposition(m, part, disc.dofmap, 1)
    one = SchwarzPreconditioner(A, dec, None, "one-level")
    empty = build_coarse_space(dec, A, nev=0)
    r = np.random.default_rng(8).standard_normal(A.shape[0])
    ref = one(r)
    dev = max(np.linalg.norm(SchwarzPreconditioner(A, dec, empty, v)(r) - ref) / np.linalg.norm(ref)
              for v in ("additive", "hybrid"))
    ok_a, ok_b = hybrid <= one_level, dev <= 1e-12
    report(8, "coarse space helps on 'across'; nev=0 equals one-level", ok_a and ok_b,
           f"geneo-hybrid {hybrid} vs oas1 {one_level} [{'ok' if ok_a else 'violated'}]; "
           f"nev=0 deviation {dev:.1e} [{'ok' if ok_b else 'violated'}]")
    assert ok_a and ok_b


def test_criterion_09_geneo_algebra(report):
    m, part, disc, s = build(16, 2)
    free = s.dofmap.u_free
    A = as_csr(s.A_u[free][:, free])
    dec = build_decomposition(m, part, disc.dofmap, 1)
    cs = build_coarse_space(dec, A, nev=15)
    P = cs.P.toarray()
    QAP = np.column_stack([cs.apply_Q(A @ P[:, j]) for j in range(cs.size)])
    galerkin_p = np.linalg.norm(QAP - P) / np.linalg.norm(P)
    q = cs.apply_Q(np.random.default_rng(9).standard_normal(A.shape[0]))
    galerkin_q = np.linalg.norm(cs.apply_Q(A @ q) - q) / np.linalg.norm(q)

    lam_min, worst_res = np.inf, 0.0
    for i in range(dec.n_subdomains):
        lam, Y = local_geneo_eigenpairs(dec, i, A)
        Ai = local_operator(dec, i, A)
        d = dec.owned[i].astype(float)
        Bi = Ai * np.outer(d, d)
        scale = (np.linalg.norm(Ai, 2) + np.abs(lam) * np.linalg.norm(Bi, 2)) * np.linalg.norm(Y, axis=0)
        worst_res = max(worst_res, float(np.max(np.linalg.norm(Ai @ Y - (Bi @ Y) * lam, axis=0) / scale)))
        lam_min = min(lam_min, lam.min())

    # 10-DOF 1D chain, two subdomains with a two-DOF overlap
    C = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(10, 10), format="csr")
    dofs = [np.arange(0, 6), np.arange(4, 10)]
    chain = Decomposition(10, np.arange(10), dofs, [dofs[0] <= 4, dofs[1] >= 5], [None, None], 1, 0.5)
    chain_err = 0.0
    for i in range(2):
        lam, _ = local_geneo_eigenpairs(chain, i, C)
        Ci = C.toarray()[np.ix_(dofs[i], dofs[i])]
        D = np.diag(chain.owned[i].astype(float))
        w = sla.eigvals(Ci, D @ Ci @ D)
        ref = np.sort(w[np.isfinite(w) & (np.abs(w) < 1e12)].real)
        chain_err = max(chain_err, float(np.max(np.abs(lam - ref) / np.abs(ref))))

    ok = galerkin_p <= 1e-10 and galerkin_q <= 1e-10 and lam_min >= -1e-10 and worst_res <= 1e-8 and chain_err <= 1e-8
    report(9, "GenEO algebra", ok,
           f"QAP-P {galerkin_p:.1e}, QAQ-Q {galerkin_q:.1e}, min eig {lam_min:.1e}, "
           f"residual {worst_res:.1e}, chain oracle {chain_err:.1e}")
    assert ok


def test_criterion_10_gmres_contract(report):
    rng = np.random.default_rng(10)
    n = 40
    G = rng.standard_normal((n, n))
    G += (1.0 - min(np.linalg.eigvalsh(0.5 * (G + G.T)).min(), 0.0)) * np.eye(n)
    _, rep = gmres(lambda v: G @ v, None, rng.standard_normal(n), config=KrylovConfig(rtol=1e-10, restart=7))
    bounds = rep.cycle_starts + [len(rep.history)]
    monotone = all(
        all(b <= a * (1 + 1e-12) for a, b in zip(rep.history[s:e - 1], rep.history[s + 1:e]))
        for s, e in zip(bounds[:-1], bounds[1:])
    )
    D = np.diag([1.0, 2.0, 3.0])
    _, rep3 = gmres(lambda v: D @ v, None, np.ones(3))
    _, rep1 = gmres(lambda v: v, None, rng.standard_normal(5))
    ok = rep.converged and monotone and rep3.converged and rep3.iterations <= 3 and rep1.iterations == 1
    report(10, "GMRES contract", ok,
           f"per-cycle monotone {monotone}, diag(1,2,3) {rep3.iterations} its, identity {rep1.iterations} it")
    assert ok
