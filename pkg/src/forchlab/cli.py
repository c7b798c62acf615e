"""Command line entry point: ``forchlab simulate|certify|verify|report``.

Exit codes: 0 ok, 1 configuration error, 2 solver abort, 3 missing inputs,
4 failed check.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import estimates as est
from .config import CHECK_IDS, ConfigError, load_config
from .constitutive import certify_bounds
from .grid import Grid
from .inequalities import (InputError, check_elliptic_ps, check_parabolic_ps, check_weighted_variants,
                           elliptic_ps_params, estimate_sobolev_constant, genn_bound,
                           parabolic_ps_params, random_admissible_genn)
from .io import load_trajectory, save_trajectory, write_json
from .mms import spatial_convergence
from .reports import REPORT_DIR, write_summary
from .solver import FVSolver, SolverError


EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_MISSING, EXIT_CHECK = 0, 1, 2, 3, 4


def config_digest(rc):
    return hashlib.sha256(json.dumps(rc.cfg, sort_keys=True).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# constants and schedules

def _moser(rc, domain, bar_c=None):
    e = rc.cfg["estimates"]
    return est.moser_constants(rc.spec.constants, e["r_star"], e["kappa_t"], e["alpha0"], e["p"],
                               domain, bar_c=e.get("bar_c", bar_c), B=e["B"])


def _lemma31(rc, domain):
    e = rc.cfg["estimates"]
    return est.lemma31_constants(rc.spec.constants, e["alpha"], e["r_star"], domain, bar_c=e.get("bar_c"))


def admissible_times(rc, grid):
    """``t0`` for the ``L^alpha`` stage and for the Moser stage (``nan`` when invalid)."""
    B = rc.cfg["estimates"]["B"]
    out = {}
    for key, consts in (("thm32", _lemma31(rc, grid.domain)), ("moser", _moser(rc, grid.domain))):
        valid = consts.valid
        if valid:
            F = est.boundary_functionals(rc.spec, consts, [0.0, 1.0], grid, B=B, horizon=1.0)
            out[key] = F.t0
        else:
            out[key] = float("nan")
    return out


def snapshot_times(rc, grid):
    """Snapshot schedule and the admissible times used to build it."""
    tc = rc.cfg["time"]
    t0s = {}
    k = tc.get("t0_snapshots", 0)
    if k or tc["horizon"] == "t0":
        t0s = admissible_times(rc, grid)
    finite = [v for v in t0s.values() if np.isfinite(v)]
    if tc["horizon"] == "t0":
        if not finite:
            raise ConfigError("time/horizon: 't0' requested but no estimate constants are valid")
        T = max(finite)
    else:
        T = float(tc["horizon"])
    snaps = tc.get("snapshots", 11)
    times = list(snaps) if isinstance(snaps, list) else list(np.linspace(0.0, T, snaps))
    for t0 in finite:
        times += [t0 * i / k for i in range(1, k + 1) if t0 * i / k <= T]
    times = sorted(set(float(t) for t in times))
    return times, t0s


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(rc, out, args):
    grid = Grid(rc.grid_shape, rc.spec.domain)
    times, t0s = snapshot_times(rc, grid)
    tol = rc.cfg["tolerances"]
    kw = dict(cfl=rc.cfg["time"].get("cfl", 0.4), tol=tol["newton"],
              positivity_tol=tol["positivity"], abort_below=tol["abort_below"])
    solver = rc.mms.solver(rc.spec, grid, **kw) if rc.mms else FVSolver(rc.spec, grid, **kw)
    try:
        traj = solver.run(times, dt=rc.cfg["time"].get("dt"))
    except SolverError as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    extra = {"config_digest": config_digest(rc), "t0": t0s, "law": rc.law.to_dict()}
    if rc.mms:
        sizes = rc.cfg["mms"].get("sizes", [8, 16, 32])
        conv = spatial_convergence(rc.mms, rc.spec, sizes=tuple(sizes))
        u_exact = grid.sample(rc.mms.u, traj.times[-1])
        extra["mms"] = {"spatial": conv, "final_error_max": float(np.max(np.abs(traj.snapshots[-1] - u_exact)))}
    save_trajectory(traj, out, rc.cfg["snapshot_format"], extra)
    print(f"wrote {len(traj)} snapshots to {out}")
    return EXIT_OK


def _bounds_report(rc, seed):
    c = rc.cfg["certify"]
    reps = certify_bounds(rc.law, rc.spec.rotation, rc.spec.R_star, c["samples"], seed,
                          z_max=c["z_max"], y_max=c["y_max"], n_random_dirs=c["directions"])
    return {"id": "bounds", "theorem": "bounds", "pass": all(r.passed for r in reps),
            "margin_min": min(r.min_margin for r in reps), "samples": c["samples"], "seed": seed,
            "law": rc.law.to_dict(), "constants": rc.spec.constants.to_dict(),
            "bounds": [r.to_dict() for r in reps], "notes": [f"{len(reps)} inequalities, {c['samples']} samples"]}


def cmd_certify(rc, out, args):
    rep = _bounds_report(rc, args.seed)
    write_json(os.path.join(out, REPORT_DIR, "bounds.json"), rep)
    write_summary(out)
    print(f"bounds: {'pass' if rep['pass'] else 'fail'} (min margin {rep['margin_min']:.6g})")
    return EXIT_OK if rep["pass"] else EXIT_CHECK


def _genn_report(rc, seed):
    rng = np.random.default_rng(seed)
    n = rc.cfg["genn"]["draws"]
    res = [genn_bound(random_admissible_genn(rng)) for _ in range(n)]
    worst = min(res, key=lambda r: r["log_bound"] - np.log(max(r["direct_max"], 1e-300)))
    return {"id": "genn", "theorem": "genn", "pass": all(r["pass"] for r in res), "draws": n, "seed": seed,
            "failures": sum(not r["pass"] for r in res), "margin_min": None,
            "worst": worst, "notes": [f"{n} seeded admissible draws"]}


def _ps_report(rc, traj, seed):
    spec, grid = rc.spec, traj.grid
    e, ps = rc.cfg["estimates"], rc.cfg["ps"]
    a = spec.constants.a
    p = 2 - a
    r_star = e["r_star"]
    EP = elliptic_ps_params(3, p, r_star, ps["r"], ps["s"], e["alpha"])
    PP = parabolic_ps_params(3, p, r_star, ps["s"], e["alpha"])
    rep = {"id": "ps", "theorem": "ps", "seed": seed, "notes": []}
    if not (EP.valid and PP.valid):
        rep.update({"pass": None, "margin_min": None,
                    "notes": ["not applicable: " + "; ".join(EP.reasons + PP.reasons)]})
        return rep
    bar_c = estimate_sobolev_constant(grid, r_star * p, n_probes=ps["probes"], seed=seed)
    Psi = [grid.sample(spec.data.Psi, t) for t in traj.times]
    ubar = [np.asarray(u) - P for u, P in zip(traj.snapshots, Psi)]
    checks = {}
    i = len(traj) - 1
    W = (1 + np.abs(traj.snapshots[i])) ** (-ps["beta"])
    try:
        checks["elliptic"] = check_elliptic_ps(ubar[i], W, EP, ps["eps"], bar_c, grid)
        var = check_weighted_variants(ubar[i], Psi[i], EP, ps["beta"], ps["eps"], bar_c, grid)
        checks["weighted_i"], checks["weighted_ii"] = var["i"], var["ii"]
        checks["parabolic"] = check_parabolic_ps(traj.times, ubar, Psi, PP, ps["beta"], bar_c, grid)
    except InputError as exc:
        rep.update({"pass": None, "margin_min": None, "notes": [f"not applicable: {exc}"]})
        return rep
    margins = [c["margin"] for c in checks.values() if "margin" in c]
    rep.update({"pass": all(c["pass"] for c in checks.values()), "margin_min": min(margins),
                "bar_c": bar_c, "checks": checks,
                "notes": [f"final snapshot t={traj.times[i]:.6g}; bar_c={bar_c:.6g}"]})
    return rep


def run_checks(rc, traj, checks, seed, strict=False):
    """All requested reports as dicts keyed by check id."""
    spec, grid = rc.spec, traj.grid
    e = rc.cfg["estimates"]
    out = {}
    need_L = "thm32" in checks
    need_M = any(c in checks for c in ("thm45", "thm52"))
    if "bounds" in checks:
        out["bounds"] = _bounds_report(rc, seed)
    if "genn" in checks:
        out["genn"] = _genn_report(rc, seed)
    if "ps" in checks:
        out["ps"] = _ps_report(rc, traj, seed)
    if need_L:
        L = _lemma31(rc, grid.domain)
        F = est.boundary_functionals(spec, L, traj.times, grid, B=e["B"], u0=traj.snapshots[0])
        out["thm32"] = est.check_theorem_32(traj, spec, F).to_dict()
    if need_M:
        M = _moser(rc, grid.domain)
        F = est.boundary_functionals(spec, M, traj.times, grid, B=e["B"], u0=traj.snapshots[0])
        if "thm45" in checks:
            out["thm45"] = est.check_theorem_45(traj, spec, F, sigma=e["sigma"]).to_dict()
        if "thm52" in checks:
            out["thm52"] = est.check_theorem_52(traj, spec, F).to_dict()
    if "thm51" in checks:
        out["thm51"] = est.check_maximum_principle(traj, spec, C_mp=e.get("C_mp")).to_dict()
    for k, rep in out.items():
        rep["id"] = k
        if strict and rep.get("pass") is None:
            rep["pass"] = False
            rep.setdefault("notes", []).append("strict: not-applicable counts as failure")
    return out


def cmd_verify(rc, out, args):
    try:
        traj, _ = load_trajectory(out)
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    checks = args.checks if args.checks is not None else (rc.checks or [c for c in CHECK_IDS if c != "bounds"])
    reports = run_checks(rc, traj, checks, args.seed, strict=args.strict)
    for k, rep in reports.items():
        write_json(os.path.join(out, REPORT_DIR, f"{k}.json"), rep)
    rows = write_summary(out)
    for r in rows:
        print(f"{r['id']:8s} {r['status']:5s} {r['margin_min']}")
    return EXIT_CHECK if any(rep.get("pass") is False for rep in reports.values()) else EXIT_OK


def cmd_report(out, args):
    try:
        rows = write_summary(out)
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    for r in rows:
        print(f"{r['id']:8s} {r['status']:5s} {r['margin_min']}")
    return EXIT_CHECK if any(r["status"] == "fail" for r in rows) else EXIT_OK


# ---------------------------------------------------------------------------

def _check_list(text):
    items = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in items if s not in CHECK_IDS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown check ids {bad}; choose from {', '.join(CHECK_IDS)}")
    return items


def build_parser():
    ap = argparse.ArgumentParser(prog="forchlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate", "certify", "verify", "report"):
        sp = sub.add_parser(name)
        if name != "report":
            sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="overrides the configured seed")
        sp.add_argument("--checks", type=_check_list, default=None,
                        help=f"comma-separated subset of {','.join(CHECK_IDS)}")
        sp.add_argument("--strict", action="store_true",
                        help="count not-applicable checks as failures")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "report":
        return cmd_report(args.out, args)
    try:
        rc = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is None:
        args.seed = rc.cfg["seed"]
    os.makedirs(args.out, exist_ok=True)
    try:
        if args.command == "simulate":
            return cmd_simulate(rc, args.out, args)
        if args.command == "certify":
            return cmd_certify(rc, args.out, args)
        return cmd_verify(rc, args.out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
