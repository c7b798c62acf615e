"""Manufactured solutions: exact source terms and convergence measurements."""

from __future__ import annotations

import numpy as np

from .constitutive import invert_map, jacobian_y, jacobian_z
from .expression import Expression
from .grid import Grid
from .model import DataSpec, ProblemSpec
from .solver import FVSolver

DEFAULT_SOLUTION = "2 + sin(pi*x)*sin(pi*y)*exp(-t)"


class ManufacturedSolution:
    """Exact field ``u_hat`` and the source that makes it solve the PDE.

    The source is ``u_t - div X(u, grad u + u^2 Z)`` expanded by the chain rule,
    ``div X = D_z X . grad u + tr(D_y X M)`` with
    ``M = Hess u + 2 u Z grad u^T + u^2 Omega^2 J^2``.
    """

    def __init__(self, text=DEFAULT_SOLUTION):
        self.u = Expression(text)
        self.u_t = self.u.diff("t")
        self.grad = self.u.gradient()
        self.hess = [[g.diff(v) for v in "xyz"] for g in self.grad]

    def source(self, spec, points, t):
        pts = np.asarray(points, dtype=float)
        u = self.u.at(pts, t)
        gu = np.stack([g.at(pts, t) for g in self.grad], axis=-1)
        H = np.stack([np.stack([h.at(pts, t) for h in row], axis=-1) for row in self.hess], axis=-2)
        Z = spec.drift(pts, t)
        JJ = spec.rotation.J @ spec.rotation.J
        Y = gu + (u**2)[..., None] * Z
        M = H + 2.0 * u[..., None, None] * Z[..., :, None] * gu[..., None, :] \
            + (u**2)[..., None, None] * spec.params.Omega**2 * JJ
        X = invert_map(spec.law, spec.rotation, spec.R_star, u, Y)
        Dy = jacobian_y(spec.law, spec.rotation, spec.R_star, u, Y, X=X)
        Dz = jacobian_z(spec.law, spec.rotation, spec.R_star, u, Y, X=X, DyX=Dy)
        div = np.sum(Dz * gu, axis=-1) + np.einsum("...jk,...kj->...", Dy, M)
        return self.u_t.at(pts, t) - div

    def problem(self, law, params, domain, axis=(0.0, 0.0, 1.0), e0=None):
        """A problem whose exact solution is ``u_hat`` (boundary and initial data from it)."""
        data = DataSpec(u0=self.u.sym.subs("t", 0), psi=self.u)
        kw = {} if e0 is None else {"e0": e0}
        return ProblemSpec(law, params, domain, data, axis=axis, **kw)

    def solver(self, spec, grid, **kw):
        return FVSolver(spec, grid, source=lambda pts, t: self.source(spec, pts, t), **kw)


def truncation_residual(mms, spec, n, t=0.05, skip=1):
    """Max-norm residual of the discrete operator applied to ``u_hat`` on an ``n^3`` grid.

    Cells within ``skip`` layers of the boundary are excluded.
    """
    grid = Grid(n, spec.domain)
    sol = mms.solver(spec, grid)
    u = grid.sample(mms.u, t)
    r = sol.rhs(u, t) - grid.sample(mms.u_t, t)
    if skip:
        r = r[skip:-skip, skip:-skip, skip:-skip]
    return float(np.max(np.abs(r)))


def observed_orders(hs, errors):
    """Pairwise observed orders ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})``."""
    return [float(np.log(errors[i] / errors[i + 1]) / np.log(hs[i] / hs[i + 1]))
            for i in range(len(errors) - 1)]


def spatial_convergence(mms, spec, sizes=(16, 32, 64), t=0.05):
    """Truncation residuals and observed orders over a sequence of grids."""
    errs = [truncation_residual(mms, spec, n, t) for n in sizes]
    hs = [spec.domain.extent[0] / n for n in sizes]
    return {"sizes": list(sizes), "errors": errs, "orders": observed_orders(hs, errs)}


def temporal_self_convergence(mms, spec, n=8, t_end=0.1, dts=None):
    """Self-convergence in the time step at fixed grid.

    Runs with ``dt, dt/2, dt/4`` (or the given ``dts``) and returns the
    differences of successive solutions with the observed orders; ``order`` is
    the first of them.
    """
    grid = Grid(n, spec.domain)
    if dts is None:
        base = mms.solver(spec, grid).stable_dt(mms.solver(spec, grid).initial_state())
        dts = [base, base / 2, base / 4]
    finals = []
    for dt in dts:
        traj = mms.solver(spec, grid).run([0.0, t_end], dt=dt)
        finals.append(traj.snapshots[-1])
    diffs = [float(np.max(np.abs(finals[i] - finals[i + 1]))) for i in range(len(finals) - 1)]
    orders = [float(np.log(diffs[i] / diffs[i + 1]) / np.log(dts[i] / dts[i + 1]))
              for i in range(len(diffs) - 1)]
    return {"dts": list(dts), "differences": diffs, "orders": orders,
            "order": orders[0] if orders else float("nan")}
