"""The ten acceptance criteria at their stated tolerances.

Each test carries a ``criterion`` marker; the run ends with one PASS/FAIL line
per criterion (see ``conftest.py``).
"""

import json
import math
import os
import time

import numpy as np
import pytest

from forchlab import estimates as est
from forchlab.cli import main
from forchlab.constitutive import (ForchheimerLaw, RotationMatrix, certify_bounds, forward_map, invert_map,
                                   jacobian_y, jacobian_z, sample_points)
from forchlab.grid import Grid
from forchlab.inequalities import (elliptic_ps_params, genn_bound, parabolic_ps_params,
                                   random_admissible_genn)
from forchlab.mms import ManufacturedSolution, spatial_convergence
from forchlab.model import DataSpec, DomainSpec, ProblemSpec, ScaledParams
from forchlab.solver import FVSolver

from conftest import build, demo_config, simulate

crit = pytest.mark.criterion


def random_law(rng, N):
    ex = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 3.0, N))])
    return ForchheimerLaw(tuple(ex), tuple(rng.uniform(0.2, 5.0, N + 1)))


def laws_1_2_3(seed):
    rng = np.random.default_rng(seed)
    return [random_law(rng, N) for N in (1, 2, 3)], rng


# ---------------------------------------------------------------------------

@crit(1, "constitutive round trip")
def test_c01_round_trip(record_property):
    laws, rng = laws_1_2_3(2024)
    t = time.perf_counter()
    worst, iters = 0.0, 0
    for law in laws:
        J = RotationMatrix(rng.normal(size=3))
        Rs = rng.uniform(0.5, 2.0)
        z, y = sample_points(rng, 10_000, 10.0, 1e3)
        v, info = invert_map(law, J, Rs, z, y, return_info=True)
        res = np.linalg.norm(forward_map(law, J, z * Rs, v) - y, axis=-1) / (1 + np.linalg.norm(y, axis=-1))
        worst = max(worst, float(res.max()))
        iters = max(iters, int(info["iterations"].max()))
    elapsed = time.perf_counter() - t
    record_property("max_rel_residual", f"{worst:.2e}")
    record_property("max_newton_iters", iters)
    record_property("seconds", f"{elapsed:.2f}")
    print(f"criterion 1: residual {worst:.2e}, iterations {iters}, {elapsed:.2f} s")
    assert worst <= 1e-10 and iters <= 50 and elapsed < 10


@crit(2, "bound certification")
def test_c02_bounds(record_property):
    laws, _ = laws_1_2_3(7)
    laws.append(ForchheimerLaw((0, 1), (1, 1)))
    mins, bad = [], []
    for k, law in enumerate(laws):
        for r in certify_bounds(law, RotationMatrix((0.3, -0.2, 1.0)), 0.7, 10_000, seed=k):
            mins.append(r.min_margin)
            if not r.passed:
                bad.append((k, r.inequality_id))
    record_property("min_margin", f"{min(mins):.3e}")
    record_property("violations", len(bad))
    print(f"criterion 2: min margin {min(mins):.3e}, violations {bad}")
    assert bad == []


@crit(3, "Jacobian checks")
def test_c03_jacobians(record_property):
    laws, rng = laws_1_2_3(11)
    worst_y = worst_z = 0.0
    for law in laws:
        R, Rs = RotationMatrix(rng.normal(size=3)), rng.uniform(0.5, 2.0)
        z, y = sample_points(rng, 1001, 10.0, 1e3)
        z, y = np.maximum(z[1:], 1e-3), y[1:]  # y = 0 is checked against its exact limit below
        D, Dz = jacobian_y(law, R, Rs, z, y), jacobian_z(law, R, Rs, z, y)
        # central differences with a step relative to the point
        h = 1e-7 * np.linalg.norm(y, axis=1)
        fd = np.empty_like(D)
        for j in range(3):
            e = np.eye(3)[j]
            fd[:, :, j] = (invert_map(law, R, Rs, z, y + h[:, None] * e, tol=1e-15)
                           - invert_map(law, R, Rs, z, y - h[:, None] * e, tol=1e-15)) / (2 * h[:, None])
        worst_y = max(worst_y, float(np.max(np.linalg.norm(fd - D, axis=(1, 2)) / np.linalg.norm(D, axis=(1, 2)))))
        hz = 1e-7 * z
        fdz = (invert_map(law, R, Rs, z + hz, y, tol=1e-15) - invert_map(law, R, Rs, z - hz, y, tol=1e-15)) / (2 * hz[:, None])
        nz = np.linalg.norm(Dz, axis=1)
        worst_z = max(worst_z, float(np.max(np.linalg.norm(fdz - Dz, axis=1) / nz)))
        # at the origin X is linear to leading order: D_yX(z, 0) = (a0 I + R* z J)^(-1)
        z0 = 2.0
        D0 = jacobian_y(law, R, Rs, z0, np.zeros(3))
        exact = np.linalg.inv(law.coefficients[0] * np.eye(3) + Rs * z0 * R.J)
        assert np.allclose(D0, exact, rtol=1e-12, atol=1e-14)
    record_property("rel_err_Dy", f"{worst_y:.2e}")
    record_property("rel_err_Dz", f"{worst_z:.2e}")
    print(f"criterion 3: D_y {worst_y:.2e}, D_z {worst_z:.2e}")
    assert worst_y <= 1e-5 and worst_z <= 1e-5


@crit(4, "exponent ledger")
def test_c04_exponents(record_property):
    rng = np.random.default_rng(4)
    worst_id = worst_cross = 0.0
    for _ in range(1000):
        a = rng.uniform(0.05, 0.9)
        p = 2 - a
        lo = max(3 / (5 - a), 1 / p)
        r_star = lo + (1 - lo) * rng.uniform(0.01, 0.99)
        gap = r_star * (3 + p) - 3
        r = rng.uniform(0.01, 4.0)
        s = 2.0
        alpha = max(s, 3 * r_star * (r - p + s) / gap, 2.0) * (1 + rng.uniform(0.01, 3.0))
        E = elliptic_ps_params(3, p, r_star, r, s, alpha)
        P = parabolic_ps_params(3, p, r_star, s, alpha)
        assert E.valid and P.valid, (E.reasons, P.reasons)
        assert 0 < E.theta < 1 and E.mu > -alpha and P.kappa > 1 and 0 < P.theta_tilde < 1
        worst_id = max(worst_id, abs(E.identity_residual()) / max(1.0, alpha))
        lam0 = gap / (3 * r_star)
        worst_cross = max(worst_cross, abs(P.kappa - (1 + lam0 - a / alpha)))
    E = elliptic_ps_params(3, 1.5, 0.9, 2, 2, 20)
    P = parabolic_ps_params(3, 1.5, 0.9, 2, 20)
    M = est.moser_constants(ForchheimerLaw((0, 1), (1, 1)).constants(), 0.9, 1.1, 40, (1.05,) * 4,
                            DomainSpec(), bar_c=1.0)
    record_property("identity_residual", f"{worst_id:.1e}")
    record_property("cross_identity", f"{worst_cross:.1e}")
    record_property("kappa", f"{P.kappa:.6f}")
    print(f"criterion 4: theta {E.theta:.6f}, kappa {P.kappa:.6f}, lambda0 {M.lambda0:.6f}, ell1 {M.ell1}")
    assert worst_id <= 1e-12 and worst_cross <= 1e-12
    assert abs(E.theta - 0.274809) < 1e-6
    assert abs(M.lambda0 - 0.388889) < 1e-6
    assert abs(M.ell1 - 3.025) < 1e-6
    # the kappa formula at these inputs gives 1 + 1.05/2.7 - 0.025 = 1.363889
    assert abs(P.kappa - 1.363889) < 1e-6


@pytest.mark.xfail(strict=True, reason="the listed golden 1.338889 drops a term: 1 + 1.05/2.7 - 0.025 = 1.363889")
def test_c04_kappa_listed_golden_value():
    assert abs(parabolic_ps_params(3, 1.5, 0.9, 2, 20).kappa - 1.338889) < 1e-6


@crit(5, "Genn lemma")
def test_c05_genn(record_property):
    rng = np.random.default_rng(5)
    fails = [i for i in range(1000) if not genn_bound(random_admissible_genn(rng))["pass"]]
    record_property("draws", 1000)
    record_property("violations", len(fails))
    print(f"criterion 5: {len(fails)} violations in 1000 draws")
    assert fails == []


@crit(6, "solver sanity")
def test_c06_constant_preserved(record_property):
    law = ForchheimerLaw((0, 1), (1, 1))
    spec = ProblemSpec(law, ScaledParams(0.05, 1.0, 0.0, 0.0), DomainSpec(), DataSpec(u0="2", psi="2"))
    g = Grid(8)
    sol = FVSolver(spec, g)
    dt = sol.stable_dt(sol.initial_state())
    traj = sol.run([0.0, 1000 * dt], dt=dt)
    record_property("steps", traj.meta.get("steps"))
    assert traj.meta["steps"] >= 1000
    assert np.array_equal(traj.snapshots[-1], np.full(g.shape, 2.0))


@crit(6, "solver sanity")
def test_c06_mms_spatial_order(record_property):
    mms = ManufacturedSolution("2 + sin(pi*x)*sin(pi*y)*exp(-t)")
    spec = mms.problem(ForchheimerLaw((0, 1), (1, 1)), ScaledParams(0.05, 1.0, 0.5, 0.5), DomainSpec())
    t = time.perf_counter()
    conv = spatial_convergence(mms, spec, sizes=(16, 32, 64))
    elapsed = time.perf_counter() - t
    orders = conv["orders"]
    record_property("orders", ",".join(f"{o:.3f}" for o in orders))
    record_property("seconds", f"{elapsed:.1f}")
    print(f"criterion 6: orders {orders}, {elapsed:.1f} s")
    assert min(orders) >= 1.8 and elapsed < 300


@crit(7, "L^alpha bound")
def test_c07_theorem32(smooth_run, record_property):
    rc, traj, _ = smooth_run
    spec = rc.spec
    L = est.lemma31_constants(spec.constants, 20, 0.9, spec.domain)
    F = est.boundary_functionals(spec, L, traj.times, traj.grid, u0=traj.snapshots[0])
    rep = est.check_theorem_32(traj, spec, F)
    neg = est.check_theorem_32(traj, spec, F, lhs_scale=1e6)
    record_property("t0", f"{F.t0:.3e}")
    record_property("checked", len(rep.times))
    record_property("margin_min", f"{rep.margin_min:.3g}")
    record_property("negative_control", neg.status)
    print(f"criterion 7: t0 {F.t0:.3e}, {len(rep.times)} entries, mixed {rep.extra['mixed_term']}")
    assert traj.grid.shape == (16, 16, 16)
    assert rep.passed and "mixed_term" in rep.extra and len(rep.times) >= 3
    assert neg.passed is False


@pytest.fixture(scope="module")
def refinement_runs():
    out = []
    for n in (8, 12, 16):
        rc = build(demo_config("smooth", time={"horizon": 0.004, "snapshots": 5, "t0_snapshots": 0}))
        traj, _ = simulate(rc, n=n)
        out.append((rc, traj))
    return out


@crit(8, "maximum principle")
def test_c08_maximum_principle(refinement_runs, smooth_run, spiked_run, record_property):
    reps = [est.check_maximum_principle(traj, rc.spec) for rc, traj in refinement_runs]
    for rc, traj, _ in (smooth_run, spiked_run):
        reps.append(est.check_maximum_principle(traj, rc.spec))
    const = build(demo_config("constant"))
    ctraj, _ = simulate(const)
    reps.append(est.check_maximum_principle(ctraj, const.spec))
    margins = [r.margin_min for r in reps[:3]]
    record_property("refinement_margins", ",".join(f"{m:.4g}" for m in margins))
    record_property("runs", len(reps))
    print(f"criterion 8: margins over h {margins}, all {[r.status for r in reps]}")
    assert all(r.passed for r in reps)
    assert margins[0] > margins[1] > margins[2]


@crit(9, "L^infty bounds")
def test_c09_moser_bounds(smooth_run, spiked_run, record_property):
    statuses = []
    for rc, traj, _ in (smooth_run, spiked_run):
        e = rc.cfg["estimates"]
        M = est.moser_constants(rc.spec.constants, e["r_star"], e["kappa_t"], e["alpha0"], e["p"], rc.spec.domain)
        assert M.valid, M.reasons
        assert all(math.isfinite(v) for v in (M.log_Cbar1, M.log_Cbar2, M.log_Cbar3))
        F = est.boundary_functionals(rc.spec, M, traj.times, traj.grid, u0=traj.snapshots[0])
        r45 = est.check_theorem_45(traj, rc.spec, F, sigma=e["sigma"])
        r52 = est.check_theorem_52(traj, rc.spec, F)
        statuses.append((r45.status, r52.status, r52.extra["branches"]))
        assert r45.passed and r52.passed
    late = statuses[1][2]["late"]
    rc, traj, _ = spiked_run
    record_property("spiked_late_entries", late)
    record_property("spike_sup", f"{float(np.max(traj.snapshots[0])):.3g}")
    print(f"criterion 9: {statuses}")
    assert late > 0


@crit(10, "determinism")
def test_c10_determinism(tmp_path, record_property):
    raw = demo_config("smooth", time={"horizon": 0.002, "snapshots": 3, "t0_snapshots": 4},
                      certify={"samples": 2000}, genn={"draws": 50})
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(raw))
    trees = []
    for k in range(2):
        out = str(tmp_path / f"run{k}")
        assert main(["simulate", "--config", str(cfg), "--out", out]) == 0
        assert main(["verify", "--config", str(cfg), "--out", out]) == 0
        files = {}
        for d, _, fs in os.walk(out):
            for f in fs:
                p = os.path.join(d, f)
                files[os.path.relpath(p, out)] = open(p, "rb").read()
        trees.append(files)
    record_property("files", len(trees[0]))
    print(f"criterion 10: {len(trees[0])} files compared")
    assert trees[0] == trees[1]
