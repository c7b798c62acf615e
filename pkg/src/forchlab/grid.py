"""Uniform cell-centered grid on a box with quadrature and gradient helpers."""

from __future__ import annotations

import numpy as np

from .model import DomainSpec


class Grid:
    """Cell-centered uniform grid.

    Parameters
    ----------
    shape : tuple of int
        Cells per axis, each at least 2.
    domain : DomainSpec
    """

    def __init__(self, shape, domain=None):
        if isinstance(shape, int):
            shape = (shape,) * 3
        self.shape = tuple(int(n) for n in shape)
        if len(self.shape) != 3 or min(self.shape) < 2:
            raise ValueError("a grid needs at least 2 cells per axis")
        self.domain = domain or DomainSpec()
        self.lower = np.array(self.domain.lower)
        self.h = np.array(self.domain.extent) / np.array(self.shape)
        self.axes = [self.lower[d] + (np.arange(n) + 0.5) * self.h[d] for d, n in enumerate(self.shape)]
        X, Y, Z = np.meshgrid(*self.axes, indexing="ij")
        self.centers = np.stack([X, Y, Z], axis=-1)
        self.cell_volume = float(np.prod(self.h))

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def hmax(self):
        return float(self.h.max())

    def face_centers(self, d):
        """Centers of the faces normal to axis ``d``; shape (n_d + 1, n_e, n_f, 3)."""
        axes = list(self.axes)
        axes[d] = self.lower[d] + np.arange(self.shape[d] + 1) * self.h[d]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def boundary_points(self):
        """Face centers on the six sides of the box, stacked as (M, 3)."""
        pts = []
        for d in range(3):
            fc = self.face_centers(d)
            pts.append(np.take(fc, 0, axis=d).reshape(-1, 3))
            pts.append(np.take(fc, -1, axis=d).reshape(-1, 3))
        return np.concatenate(pts)

    def integrate(self, f):
        """Midpoint rule over the box for cell values ``f``."""
        return float(np.sum(f) * self.cell_volume)

    def norm(self, f, p):
        """Discrete ``L^p`` norm; ``p = inf`` gives the grid-point max."""
        f = np.abs(np.asarray(f, dtype=float))
        if np.isinf(p):
            return float(f.max())
        m = f.max()
        if m == 0:
            return 0.0
        # factor out the max to keep large powers finite
        return float(m * (np.sum((f / m) ** p) * self.cell_volume) ** (1.0 / p))

    def gradient(self, u, boundary=0.0):
        """Cell-centered gradient of ``u`` with value ``boundary`` on the box faces.

        Central differences inside; at the first and last cell a second-order
        one-sided formula through the face value, the cell and its neighbour.
        """
        u = np.asarray(u, dtype=float)
        out = np.empty(u.shape + (3,))
        for d in range(3):
            h = self.h[d]
            v = np.moveaxis(u, d, 0)
            g = np.empty_like(v)
            g[1:-1] = (v[2:] - v[:-2]) / (2 * h)
            g[0] = (-4.0 / 3.0 * boundary + v[0] + v[1] / 3.0) / h
            g[-1] = (4.0 / 3.0 * boundary - v[-1] - v[-2] / 3.0) / h
            out[..., d] = np.moveaxis(g, 0, d)
        return out

    def sample(self, expr, t):
        """Evaluate an expression at the cell centers."""
        return expr.at(self.centers, t)

    def __repr__(self):
        return f"Grid(shape={self.shape}, h={self.h.tolist()})"
