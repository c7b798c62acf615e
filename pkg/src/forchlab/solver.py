"""Cell-centered finite volumes with explicit Euler for u_t = div X(u, grad u + u^2 Z).

Face fluxes take the arithmetic mean of the two neighbouring cells as the
density argument and a full gradient vector: the normal part from the two-point
difference, the tangential parts from the average of the neighbours' central
differences.  Dirichlet data enter through ghost cells ``2 psi - u`` so that the
face mean equals ``psi``; on boundary faces the density and the tangential
derivatives are taken from ``psi`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constitutive import InversionError, invert_map
from .grid import Grid


class SolverError(RuntimeError):
    """Time integration aborted (NaN, strong undershoot or failed inversion)."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass
class State:
    u: np.ndarray
    t: float
    dt_last: float = 0.0


@dataclass
class Trajectory:
    """Snapshots of the cell field at increasing times."""

    grid: Grid
    times: list
    snapshots: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        if len(self.times) != len(self.snapshots):
            raise ValueError("times and snapshots differ in length")

    def __len__(self):
        return len(self.times)

    def window(self, t_lo, t_hi, closed_left=False):
        """Indices of snapshots with ``t_lo < t <= t_hi`` (``<=`` on the left if closed)."""
        return [i for i, t in enumerate(self.times)
                if (t >= t_lo if closed_left else t > t_lo) and t <= t_hi]


def _face_gradient(P, d, h, tang_axes):
    """Normal and tangential differences on the faces normal to ``d``.

    ``P`` is the ghost-padded field with axis ``d`` moved to the front.
    Returns ``(mean, grad)``, with ``grad[..., e]`` the derivative along axis ``e``.
    """
    L, R = P[:-1, 1:-1, 1:-1], P[1:, 1:-1, 1:-1]
    mean = 0.5 * (L + R)
    g = np.empty(mean.shape + (3,))
    g[..., d] = (R - L) / h[d]
    e1, e2 = tang_axes
    g[..., e1] = (P[:-1, 2:, 1:-1] - P[:-1, :-2, 1:-1] + P[1:, 2:, 1:-1] - P[1:, :-2, 1:-1]) / (4 * h[e1])
    g[..., e2] = (P[:-1, 1:-1, 2:] - P[:-1, 1:-1, :-2] + P[1:, 1:-1, 2:] - P[1:, 1:-1, :-2]) / (4 * h[e2])
    return mean, g


class FVSolver:
    """Explicit finite-volume solver for one :class:`~forchlab.model.ProblemSpec`.

    Parameters
    ----------
    spec : ProblemSpec
    grid : Grid
    cfl : float
        Safety factor in ``dt = cfl h^2 / (2 d Lambda)``.
    source : callable, optional
        ``f(points, t)`` added to the right-hand side (manufactured solutions only).
    positivity_tol, abort_below : float
        Undershoots below ``-positivity_tol`` are logged; below ``abort_below``
        the run aborts.
    """

    def __init__(self, spec, grid, cfl=0.4, source=None, tol=1e-12,
                 positivity_tol=1e-10, abort_below=-1e-3):
        self.spec = spec
        self.grid = grid
        self.cfl = cfl
        self.tol = tol
        self.positivity_tol = positivity_tol
        self.abort_below = abort_below
        if source is None and spec.data.source is not None:
            src = spec.data.source
            source = lambda pts, t: src.at(pts, t)  # noqa: E731
        self.source = source
        J = spec.rotation
        self._faces = [grid.face_centers(d) for d in range(3)]
        # J^2 x at face centers does not depend on time
        self._JJx = [J.apply(J.apply(f)) for f in self._faces]
        self._tang = [tuple(e for e in range(3) if e != d) for d in range(3)]
        self._bnd = [(np.take(f, 0, axis=d), np.take(f, -1, axis=d)) for d, f in enumerate(self._faces)]
        self._guess = None
        self.stats = {"operator_calls": 0, "max_newton": 0}

    # -- boundary data -------------------------------------------------------
    def _psi_faces(self, t):
        data = self.spec.data
        out = []
        for d in range(3):
            sides = []
            for pts in self._bnd[d]:
                val = data.psi.at(pts, t)
                grad = np.stack([gi.at(pts, t) for gi in data.grad_psi], axis=-1)
                sides.append((val, grad))
            out.append(sides)
        return out

    def padded(self, u, t, psi_faces=None):
        """Field with one ghost layer per side, ghost = 2 psi - u."""
        pf = psi_faces or self._psi_faces(t)
        P = np.zeros(tuple(n + 2 for n in u.shape))
        P[1:-1, 1:-1, 1:-1] = u
        for d in range(3):
            Pd = np.moveaxis(P, d, 0)
            ud = np.moveaxis(u, d, 0)
            # face arrays keep the tangential axes in grid order, matching Pd
            Pd[0, 1:-1, 1:-1] = 2.0 * pf[d][0][0] - ud[0]
            Pd[-1, 1:-1, 1:-1] = 2.0 * pf[d][1][0] - ud[-1]
        return P

    # -- operator ------------------------------------------------------------
    def face_fluxes(self, u, t):
        """Normal fluxes on the faces of each axis; list of arrays (n_d + 1, ...)."""
        spec, grid = self.spec, self.grid
        pf = self._psi_faces(t)
        P = self.padded(u, t, pf)
        G = spec.params.G
        e0 = spec.gravity_direction(t)
        Om2 = spec.params.Omega ** 2
        zs, ys, shapes = [], [], []
        for d in range(3):
            Pd = np.moveaxis(P, d, 0)
            mean, g = _face_gradient(Pd, d, grid.h, self._tang[d])
            # boundary faces: density and tangential slope from psi exactly
            for side, idx in ((0, 0), (1, -1)):
                val, grad = pf[d][side]
                mean[idx] = val
                for e in self._tang[d]:
                    g[idx][..., e] = grad[..., e]
            Z = -G * e0 + Om2 * np.moveaxis(self._JJx[d], d, 0)
            Y = g + (mean**2)[..., None] * Z
            zs.append(mean.reshape(-1))
            ys.append(Y.reshape(-1, 3))
            shapes.append(mean.shape)
        z = np.concatenate(zs)
        y = np.concatenate(ys)
        guess = self._guess if self._guess is not None and self._guess.shape == y.shape else None
        try:
            X, info = invert_map(spec.law, spec.rotation, spec.R_star, z, y, tol=self.tol,
                                 guess=guess, return_info=True)
        except InversionError as exc:
            raise SolverError(f"flux inversion failed at t={t:.6g}: {exc}") from exc
        self._guess = X
        self.stats["operator_calls"] += 1
        self.stats["max_newton"] = max(self.stats["max_newton"], int(info["iterations"].max()))
        out, o = [], 0
        for d in range(3):
            m = int(np.prod(shapes[d]))
            flux = X[o:o + m, d].reshape(shapes[d])
            out.append(np.moveaxis(flux, 0, d))
            o += m
        return out

    def spatial_operator(self, u, t):
        """Discrete ``div X(u, grad u + u^2 Z)`` at the cell centers."""
        F = self.face_fluxes(u, t)
        h = self.grid.h
        return (np.diff(F[0], axis=0) / h[0] + np.diff(F[1], axis=1) / h[1]
                + np.diff(F[2], axis=2) / h[2])

    def rhs(self, u, t):
        r = self.spatial_operator(u, t)
        if self.source is not None:
            r = r + self.source(self.grid.centers, t)
        return r

    # -- time stepping -------------------------------------------------------
    def diffusivity_bound(self, u, t=0.0):
        """Ceiling for ``|D_y X|`` from its constitutive upper bound at ``y = 0``."""
        c = self.spec.constants
        zmax = float(np.max(np.abs(u)))
        for side in self._psi_faces(t):
            for val, _ in side:
                zmax = max(zmax, float(np.max(np.abs(val))))
        return c.c7 * (1.0 + c.chi0 + self.spec.R_star * zmax) ** c.a

    def stable_dt(self, state):
        lam = self.diffusivity_bound(state.u, state.t)
        return self.cfl * float(np.min(self.grid.h)) ** 2 / (2 * 3 * lam)

    def step(self, state, dt):
        u = state.u + dt * self.rhs(state.u, state.t)
        return State(u, state.t + dt, dt)

    def initial_state(self):
        return State(self.grid.sample(self.spec.data.u0, 0.0), 0.0)

    def run(self, times, dt=None, state=None):
        """Integrate to each time in ``times`` (which must start at 0), hitting it exactly.

        Parameters
        ----------
        times : sequence of float
            Snapshot times, strictly increasing, starting at 0.
        dt : float, optional
            Fixed step cap; the stable step is used when omitted (and caps ``dt``).
        """
        times = [float(t) for t in times]
        if not times or times[0] != 0.0:
            raise ValueError("snapshot times must start at 0")
        state = state or self.initial_state()
        snaps = [state.u.copy()]
        events = []
        steps = 0
        dts = []
        for t_next in times[1:]:
            while state.t < t_next:
                cap = self.stable_dt(state)
                if dt is not None:
                    cap = min(cap, dt)
                remaining = t_next - state.t
                n = max(1, math.ceil(remaining / cap * (1 - 1e-12)))
                h = remaining / n
                state = self.step(state, h)
                steps += 1
                dts.append(h)
                if n == 1:
                    state.t = t_next
                umin = float(np.min(state.u))
                if not np.all(np.isfinite(state.u)):
                    raise SolverError(f"non-finite values at t={state.t:.6g}", state)
                if umin < -self.positivity_tol:
                    events.append({"t": state.t, "min_u": umin})
                    if umin < self.abort_below:
                        raise SolverError(f"undershoot {umin:.3e} below {self.abort_below} at "
                                          f"t={state.t:.6g}", state)
            snaps.append(state.u.copy())
        meta = {
            "steps": steps,
            "dt_min": min(dts) if dts else 0.0,
            "dt_max": max(dts) if dts else 0.0,
            "positivity_events": len(events),
            "positivity_min": min((e["min_u"] for e in events), default=None),
            "max_newton_iterations": self.stats["max_newton"],
        }
        return Trajectory(self.grid, times, snaps, meta)

