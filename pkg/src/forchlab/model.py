"""Scaled rotating-flow problem: parameters, drift field, chi*, data and shifts."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .constitutive import ForchheimerLaw, RotationMatrix, law_constants
from .expression import Expression, as_expression


@dataclass(frozen=True)
class PhysicalParams:
    """Unscaled parameters: porosity, compressibility, angular speed, gravity."""

    phi_tilde: float
    varpi: float
    Omega_tilde: float = 0.0
    G_tilde: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.phi_tilde < 1.0:
            raise ValueError("porosity must lie in (0, 1)")
        if not self.varpi > 0:
            raise ValueError("compressibility must be positive")
        if self.Omega_tilde < 0 or self.G_tilde < 0:
            raise ValueError("angular speed and gravity constant must be nonnegative")

    def scaled(self):
        return ScaledParams(self.varpi, self.varpi * self.phi_tilde,
                            self.varpi**2 * self.G_tilde, self.varpi * self.Omega_tilde)

    @property
    def R_star_physical(self):
        """``2 varpi Omega~ / phi~``, the unscaled route to R*."""
        return 2.0 * self.varpi * self.Omega_tilde / self.phi_tilde


@dataclass(frozen=True)
class ScaledParams:
    """Scaled parameters ``phi = varpi phi~``, ``G = varpi^2 G~``, ``Omega = varpi Omega~``."""

    varpi: float
    phi: float
    G: float
    Omega: float

    def __post_init__(self):
        if not (self.varpi > 0 and self.phi > 0):
            raise ValueError("varpi and phi must be positive")
        if self.G < 0 or self.Omega < 0:
            raise ValueError("G and Omega must be nonnegative")

    @property
    def R_star(self):
        return 2.0 * self.varpi * self.Omega / self.phi


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned box ``lower + [0, extent]``."""

    lower: tuple = (0.0, 0.0, 0.0)
    extent: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))
        if len(self.lower) != 3 or len(self.extent) != 3:
            raise ValueError("box corner and extent must be 3-vectors")
        if any(not e > 0 for e in self.extent):
            raise ValueError("box extents must be positive")

    @property
    def upper(self):
        return tuple(l + e for l, e in zip(self.lower, self.extent))

    @property
    def volume(self):
        return float(np.prod(self.extent))

    def corners(self):
        return np.array(list(itertools.product(*zip(self.lower, self.upper))))

    @property
    def r_U(self):
        """Largest ``|x|`` over the closed box (attained at a corner)."""
        return float(np.linalg.norm(self.corners(), axis=1).max())


def _vector_expr(values):
    exprs = tuple(as_expression(v) for v in values)
    if len(exprs) != 3:
        raise ValueError("a vector expression needs three components")
    return exprs


@dataclass
class DataSpec:
    """Initial data ``u0``, boundary data ``psi`` and its extension ``Psi``.

    When ``Psi`` is omitted, ``psi`` itself serves as the extension (it is a
    closed-form expression on the whole box).  Derivatives of ``Psi`` and
    ``psi`` are taken symbolically.
    """

    u0: Expression
    psi: Expression
    Psi: Expression = None
    source: Expression = None

    def __post_init__(self):
        self.u0 = as_expression(self.u0)
        self.psi = as_expression(self.psi)
        self.Psi = as_expression(self.Psi) if self.Psi is not None else self.psi
        self.source = as_expression(self.source)
        self.Psi_t = self.Psi.diff("t")
        self.grad_Psi = self.Psi.gradient()
        self.grad_psi = self.psi.gradient()

    def extension_mismatch(self, points, times):
        """Max ``|Psi - psi|`` over boundary ``points`` and ``times``."""
        return max((float(np.max(np.abs(self.Psi.at(points, t) - self.psi.at(points, t))))
                    for t in times), default=0.0)


def _default_e0():
    return (Expression(0.0), Expression(0.0), Expression(1.0))


@dataclass
class ProblemSpec:
    """Everything that defines one initial boundary value problem."""

    law: ForchheimerLaw
    params: ScaledParams
    domain: DomainSpec
    data: DataSpec
    axis: tuple = (0.0, 0.0, 1.0)
    e0: tuple = field(default_factory=_default_e0)

    def __post_init__(self):
        self.rotation = RotationMatrix(self.axis)
        self.e0 = _vector_expr(self.e0)
        self.constants = law_constants(self.law)

    @property
    def R_star(self):
        return self.params.R_star

    def gravity_direction(self, t):
        """``e0(t) = e0~(phi t)``."""
        ts = self.params.phi * float(t)
        return np.array([float(c(0.0, 0.0, 0.0, ts)) for c in self.e0])

    def check_e0_unit(self, times, tol=1e-9):
        for t in times:
            n = np.linalg.norm(self.gravity_direction(t))
            if abs(n - 1.0) > tol:
                raise ValueError(f"gravity direction has norm {n:.6g} at t={t}; it must be a unit vector")

    def drift(self, x, t):
        return drift_field(self.params, self.rotation, x, t, self.gravity_direction(t))

    @property
    def M_Z(self):
        return drift_bound(self.params, self.domain)

    @property
    def chi_star(self):
        return chi_star(self.constants, self.params, self.domain)


def drift_field(scaled, J, x, t, e0=(0.0, 0.0, 1.0)):
    """``Z(x, t) = -G e0(t) + Omega^2 J^2 x`` at points ``x`` of shape (..., 3).

    ``e0`` is the already time-evaluated unit vector.
    """
    J = J if isinstance(J, RotationMatrix) else RotationMatrix(J)
    x = np.asarray(x, dtype=float)
    return -scaled.G * np.asarray(e0, dtype=float) + scaled.Omega**2 * J.apply(J.apply(x))


def drift_bound(scaled, domain):
    """``M_Z = G + Omega^2 r_U``; an upper bound for ``|Z|`` on the box."""
    return scaled.G + scaled.Omega**2 * domain.r_U


def chi_star(law_consts, scaled, domain):
    """``max{1, R*^2, chi0^2, M_Z}``.

    Examples
    --------
    >>> from forchlab.constitutive import ForchheimerLaw
    >>> c = ForchheimerLaw((0, 1), (1, 1)).constants()
    >>> chi_star(c, ScaledParams(0.05, 1.0, 1.0, 1.0), DomainSpec())
    4.0
    """
    return float(max(1.0, scaled.R_star**2, law_consts.chi0**2, drift_bound(scaled, domain)))


def shift(u, Psi):
    """``u - Psi`` for fields sampled on the same grid."""
    u = np.asarray(u, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    if u.shape != Psi.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {Psi.shape}")
    return u - Psi


def unshift(ubar, Psi):
    """Inverse of :func:`shift`."""
    ubar = np.asarray(ubar, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    if ubar.shape != Psi.shape:
        raise ValueError(f"shape mismatch: {ubar.shape} vs {Psi.shape}")
    return ubar + Psi

