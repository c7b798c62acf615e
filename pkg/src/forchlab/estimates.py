"""Constants of the L^alpha and L^infty estimates and their checks on trajectories.

Every large constant is carried as a natural logarithm (``log_*`` fields) and
exposed as a float that saturates to ``inf``; the checks compare logarithms.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .grid import Grid
from .inequalities import estimate_sobolev_constant
from .logspace import (log_integral, log_margin, log_norm, log_sum, log_trapezoid, safe_log,
                       to_float)

LN2 = math.log(2.0)
GL_NODES = 16


@lru_cache(maxsize=32)
def _sobolev_cached(lower, extent, p_bar, n, n_probes, seed):
    from .model import DomainSpec
    return estimate_sobolev_constant(Grid(n, DomainSpec(lower, extent)), p_bar, n_probes, seed)


def sobolev_constant(domain, p_bar, n=16, n_probes=200, seed=0):
    """Empirical Sobolev constant of the box for exponent ``p_bar`` (cached)."""
    return _sobolev_cached(domain.lower, domain.extent, float(p_bar), n, n_probes, seed)


# ---------------------------------------------------------------------------
# L^alpha stage

@dataclass
class Lemma31Constants:
    """Exponents and constants of the differential inequality for ``int |u_bar|^alpha``."""

    alpha: float
    r_star: float
    a: float
    volume: float
    bar_c: float
    theta: float = math.nan
    mu: float = math.nan
    gamma: float = math.nan
    gamma_prime: float = math.nan
    mu_bar: float = math.nan
    c: dict = field(default_factory=dict)  # c9 .. c16
    log_C1: float = math.nan
    log_C2: float = math.nan
    log_C0: float = math.nan
    log_C_star: float = math.nan
    valid: bool = False
    reasons: list = field(default_factory=list)

    @property
    def C0(self):
        return to_float(self.log_C0)

    @property
    def C1(self):
        return to_float(self.log_C1)

    @property
    def C2(self):
        return to_float(self.log_C2)

    @property
    def C_star(self):
        return to_float(self.log_C_star)

    def to_dict(self):
        d = asdict(self)
        d.update(C0=self.C0, C1=self.C1, C2=self.C2, C_star=self.C_star)
        return d


def rcond_reasons(a, r_star):
    reasons = []
    if not 3.0 / (5.0 - a) < r_star < 1.0:
        reasons.append(f"need 3/(5-a) < r_star < 1, got r_star={r_star}, 3/(5-a)={3 / (5 - a):.6g}")
    if not r_star >= 1.0 / (2.0 - a):
        reasons.append(f"need r_star >= 1/(2-a)={1 / (2 - a):.6g}, got {r_star}")
    return reasons


def lemma31_constants(law_consts, alpha, r_star, domain, bar_c=None):
    """All exponents and constants of the ``L^alpha`` stage for one ``alpha``.

    Parameters
    ----------
    law_consts : LawConstants
    alpha, r_star : float
    domain : DomainSpec
    bar_c : float, optional
        Sobolev constant for ``p = r_star (2 - a)``; estimated on the box when omitted.

    Examples
    --------
    >>> from forchlab.constitutive import ForchheimerLaw
    >>> from forchlab.model import DomainSpec
    >>> L = lemma31_constants(ForchheimerLaw((0, 1), (1, 1)).constants(), 20, 0.9, DomainSpec(), bar_c=1.0)
    >>> round(L.theta, 6), L.valid
    (0.274809, True)
    """
    c = law_consts
    a = c.a
    reasons = rcond_reasons(a, r_star)
    if r_star < 1 and not alpha >= 2 * r_star / (1 - r_star):
        reasons.append(f"need alpha >= 2 r_star/(1-r_star)={2 * r_star / (1 - r_star):.6g}, got {alpha}")
    gap = r_star * (5 - a) - 3
    if gap <= 0 or not alpha > 3 * r_star * (4 - 3 * a) / gap:
        bound = 3 * r_star * (4 - 3 * a) / gap if gap > 0 else math.inf
        reasons.append(f"need alpha > 3 r_star (4-3a)/(r_star (5-a) - 3)={bound:.6g}, got {alpha}")
    if bar_c is None:
        bar_c = sobolev_constant(domain, r_star * (2 - a)) if 1 <= r_star * (2 - a) < 3 else math.nan
    L = Lemma31Constants(alpha, r_star, a, domain.volume, float(bar_c))

    den = alpha * gap - 3 * a * r_star
    if den > 0:
        th = 12 * (1 - a) * r_star / den
        L.theta = th
        if th < 1:
            L.mu = (4 * (1 - a) + a * th) / (1 - th)
            L.gamma_prime = L.mu / alpha
            L.gamma = L.gamma_prime + 2 * th / (alpha * (1 - th))
            L.mu_bar = (3 - 2 * a + th) / (1 - th)

    c9 = c.c5 / c.chi0**2
    c10 = c.c4 / 4
    k = (32 * c.c3 / c.c4) ** (1 - a)
    c11 = 4 ** (1 - a) * c.c5 + c9 + 2 * c.c3 * k + c10
    c12 = 2 * 4 ** (1 - a) * c.c3 * (1 + k)
    c13 = 5 * c12 + 2 * c11 + 1
    c14 = 4 * c12 + c11
    c15 = max(1.0, 2 * c11, c14)
    c16 = 9 * (1 + c11 + c12)
    L.c = dict(c9=c9, c10=c10, c11=c11, c12=c12, c13=c13, c14=c14, c15=c15, c16=c16)

    if not (0 < L.theta < 1):
        reasons.append(f"theta={L.theta:.6g} is not in (0, 1)")
    if not (math.isfinite(L.bar_c) and L.bar_c > 0):
        reasons.append("Sobolev constant unavailable")
    L.reasons = reasons
    L.valid = not reasons
    if not L.valid:
        return L

    th = L.theta
    e = th / (1 - th)
    lU = math.log1p(domain.volume)
    L.log_C1 = e * ((1 + r_star) / r_star * LN2
                    + (2 - a) * math.log(bar_c * (alpha - a) / (2 - a))
                    + (alpha * (1 - r_star) - 2 * r_star) / (alpha * r_star) * lU)
    L.log_C2 = math.log(c13) + L.log_C1 + e * math.log(4 * c13 / c10)
    L.log_C0 = max(L.log_C2, math.log(c15)) + math.log(alpha * (alpha - 1))
    p = alpha + 4 * (1 - a)
    L.log_C_star = (L.log_C0 + log_sum(0.0, 2 * e * LN2, (p - 1) * LN2, (p / 2 - 1) * LN2)
                    + max(1.0, (1 - r_star) * e / r_star) * lU)
    return L


# ---------------------------------------------------------------------------
# Moser stage

@dataclass
class MoserConstants:
    """Exponents and constants of the ``L^infty`` stage."""

    kappa_t: float
    alpha0: float
    r_star: float
    a: float
    p: tuple
    q: tuple
    q_tilde: float
    B: float
    lemma31: Lemma31Constants  # evaluated at alpha = beta1
    lambda0: float = math.nan
    kappa_hat: float = math.nan
    mu2: float = math.nan
    mu3: float = math.nan
    c1_bar: float = math.nan
    log_A_bar: float = math.nan
    log_c2_bar: float = math.nan
    mu_tilde: float = math.nan
    nu_tilde: float = math.nan
    ell1: float = math.nan
    ell4: float = math.nan
    ell4_G: float = math.nan
    omega: float = math.nan
    beta1: float = math.nan
    omega1: float = math.nan
    omega2: float = math.nan
    omega3: float = math.nan
    omega4: float = math.nan
    omega5: float = math.nan
    log_Cbar1: float = math.nan
    log_Cbar2: float = math.nan
    log_Cbar3: float = math.nan
    product_terms: int = 0
    valid: bool = False
    reasons: list = field(default_factory=list)

    @property
    def A_bar(self):
        return to_float(self.log_A_bar)

    @property
    def Cbar1(self):
        return to_float(self.log_Cbar1)

    @property
    def Cbar2(self):
        return to_float(self.log_Cbar2)

    @property
    def Cbar3(self):
        return to_float(self.log_Cbar3)

    def to_dict(self):
        d = asdict(self)
        d["lemma31"] = self.lemma31.to_dict()
        d.update(A_bar=self.A_bar, Cbar1=self.Cbar1, Cbar2=self.Cbar2, Cbar3=self.Cbar3)
        return d


def moser_products(kappa_t, alpha0, a, tail_tol=1e-10, max_terms=100000):
    """``log mu~``, ``log nu~`` and the ``G``-route ``log l4`` by truncated products.

    Factors are ``r~_j/beta_j = 1 - 2/beta_j`` and
    ``s~_j/beta_j = (1 + 4(1-a)/beta_j)(1 + a/(beta_j - a))`` with
    ``beta_j = kappa~^j alpha0``.  Terms are summed until the geometric bound
    on the remaining log-terms falls below ``tail_tol``.
    """
    q = 1.0 / kappa_t
    lr, ls = [], []
    j = 0
    while True:
        b = kappa_t**j * alpha0
        lr.append(math.log1p(-2.0 / b))
        ls.append(math.log1p(4 * (1 - a) / b) + math.log1p(a / (b - a)))
        # log-terms decay at least geometrically with ratio 1/kappa~
        tail = max(abs(lr[-1]), ls[-1]) * q / (1 - q)
        j += 1
        if tail < tail_tol or j >= max_terms:
            break
    tr = lr[-1] * q / (1 - q)
    ts = ls[-1] * q / (1 - q)
    ls_arr = np.array(ls)
    # G-route: the largest product over 1 <= m <= m' (Kadane on the logs)
    best_end, best = -math.inf, 0.0
    for v in ls_arr[1:]:
        best_end = v if best_end == -math.inf else max(v, best_end + v)
        best = max(best, best_end)
    return {"log_mu": float(np.sum(lr) + tr), "log_nu": float(np.sum(ls_arr) + ts),
            "log_ell4_G": best + ts, "log_s0_over_b0": float(ls_arr[0]), "terms": j}


def assumption44_reasons(a, r_star, kappa_t, alpha0, p):
    reasons = rcond_reasons(a, r_star)
    lam0 = (r_star * (5 - a) - 3) / (3 * r_star)
    if lam0 <= 0:
        reasons.append(f"lambda0={lam0:.6g} must be positive")
        return reasons
    if not 1 < kappa_t < math.sqrt(1 + lam0):
        reasons.append(f"need 1 < kappa~ < sqrt(1+lambda0)={math.sqrt(1 + lam0):.6g}, got {kappa_t}")
    for i, pi in enumerate(p, 1):
        if not kappa_t > pi > 1:
            reasons.append(f"need kappa~ > p{i} > 1, got p{i}={pi}")
    lower = [4 * (1 - a) / (kappa_t - 1) if kappa_t > 1 else math.inf,
             a / (1 + lam0 - kappa_t**2) if 1 + lam0 > kappa_t**2 else math.inf,
             2 * r_star / (kappa_t * (1 - r_star))]
    if kappa_t > p[2]:
        lower.append(2 * p[2] * (1 - a) / (kappa_t - p[2]))
    else:
        lower.append(math.inf)
    if not alpha0 >= max(lower):
        reasons.append(f"need alpha0 >= {max(lower):.6g}, got {alpha0}")
    strict = max(2.0, a / lam0, (4 - 3 * a) / (lam0 * kappa_t))
    if not alpha0 > strict:
        reasons.append(f"need alpha0 > {strict:.6g}, got {alpha0}")
    return reasons


def moser_constants(law_consts, r_star, kappa_t, alpha0, p, domain, bar_c=None, B=0.5):
    """Constants of the ``L^infty`` estimate.

    Parameters
    ----------
    p : sequence of 4 floats
        Exponents ``p1..p4``; ``q_i`` are their Hoelder conjugates.
    B : float
        The number in ``(0, 1)`` bounding ``gamma C* V0^gamma int E``; enters ``Cbar3``.

    Examples
    --------
    >>> from forchlab.constitutive import ForchheimerLaw
    >>> from forchlab.model import DomainSpec
    >>> c = ForchheimerLaw((0, 1), (1, 1)).constants()
    >>> M = moser_constants(c, 0.9, 1.1, 40, (1.05,) * 4, DomainSpec(), bar_c=1.0)
    >>> round(M.lambda0, 6), round(M.ell1, 6), M.valid
    (0.388889, 3.025, True)
    """
    a = law_consts.a
    p = tuple(float(v) for v in p)
    if len(p) != 4:
        raise ValueError("need four exponents p1..p4")
    q = tuple(pi / (pi - 1) if pi > 1 else math.inf for pi in p)
    reasons = assumption44_reasons(a, r_star, kappa_t, alpha0, p)
    if not 0 < B < 1:
        reasons.append(f"need 0 < B < 1, got {B}")
    if bar_c is None:
        bar_c = sobolev_constant(domain, r_star * (2 - a))
    beta1 = kappa_t * alpha0
    L = lemma31_constants(law_consts, beta1, r_star, domain, bar_c)
    reasons += [f"at alpha=beta1: {r}" for r in L.reasons if r not in reasons]
    M = MoserConstants(kappa_t, alpha0, r_star, a, p, q, 2 * max(2 - a, 3 - 2 * a), B, L, beta1=beta1)
    M.lambda0 = (r_star * (5 - a) - 3) / (3 * r_star)
    M.kappa_hat = 1 + M.lambda0 - a / 2
    M.mu2 = 1 + a / (1 + M.lambda0)
    M.mu3 = 2 + a / (1 + M.lambda0)
    if kappa_t > 1 and alpha0 > 0:
        M.ell1 = kappa_t**2 / (alpha0 * (kappa_t - 1) ** 2)
    M.reasons = reasons
    M.valid = not reasons
    if not M.valid:
        return M

    c10, c16 = L.c["c10"], L.c["c16"]
    M.c1_bar = max(1.0, (bar_c / (2 - a)) ** (2 - a) / c10)
    M.log_A_bar = (4 + 1 / r_star) * LN2 + math.log(M.c1_bar) + 2 * math.log(c16)
    M.log_c2_bar = M.mu3 * math.log(2 * kappa_t) + M.log_A_bar
    prods = moser_products(kappa_t, alpha0, a)
    M.product_terms = prods["terms"]
    M.mu_tilde = math.exp(prods["log_mu"])
    M.nu_tilde = math.exp(prods["log_nu"])
    M.ell4 = math.exp(prods["log_nu"] - prods["log_s0_over_b0"])
    M.ell4_G = math.exp(prods["log_ell4_G"])
    M.omega = M.ell4 * M.ell1
    M.omega1 = M.omega / M.kappa_hat
    M.omega2 = M.mu2 * M.omega
    M.omega3 = M.mu3 * M.omega
    M.omega4 = M.omega3 + M.nu_tilde / beta1
    M.omega5 = M.omega3 + M.omega1 * (1 - r_star) / r_star
    M.log_Cbar1 = (M.omega1 * LN2 + M.omega * M.log_c2_bar + M.omega3 * math.log(alpha0)
                   + M.omega5 * math.log1p(domain.volume))
    M.log_Cbar2 = M.omega2 * math.log(3.0) + M.omega4 * LN2 + M.log_Cbar1
    M.log_Cbar3 = M.log_Cbar2 - (2 * M.omega1 + M.nu_tilde) / (beta1 * L.gamma) * math.log1p(-B)
    return M


# ---------------------------------------------------------------------------
# boundary-data functionals

def _gauss(t_lo, t_hi, n=GL_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (t_hi - t_lo)
    return t_lo + half * (x + 1), half * w


class BoundaryFunctionals:
    """Quadrature evaluation of the functionals of the boundary extension ``Psi``.

    Space integrals use the midpoint rule on ``grid``; time integrals use
    Gauss-Legendre on ``[0, t]``.  ``times`` are the snapshot times used for
    the ``ess sup`` windows.

    Parameters
    ----------
    spec : ProblemSpec
    consts : Lemma31Constants or MoserConstants
        With Moser constants, the ``L^alpha`` quantities are taken at ``alpha = beta1``.
    times : sequence of float
    grid : Grid
    B : float
        Target in the admissibility condition that defines ``t0``.
    horizon : float, optional
        Defaults to the last of ``times``.
    u0 : ndarray, optional
        Initial field on the grid (the trajectory's first snapshot); sampled from
        the data when omitted.
    """

    def __init__(self, spec, consts, times, grid, B=0.5, horizon=None, u0=None):
        self.spec = spec
        self.grid = grid
        self.moser = consts if isinstance(consts, MoserConstants) else None
        self.L = consts.lemma31 if self.moser else consts
        self.times = np.asarray(times, dtype=float)
        self.B = float(B)
        self.horizon = float(horizon if horizon is not None else self.times[-1])
        self.alpha = self.L.alpha
        self.a = self.L.a
        self.chi_star = spec.chi_star
        self.log_chi = math.log(self.chi_star)
        self._pts = np.concatenate([grid.centers.reshape(-1, 3), grid.boundary_points()])
        self._cache = {}
        self._logE = {}
        data = spec.data
        if u0 is None:
            u0 = grid.sample(data.u0, 0.0)
        ubar0 = np.asarray(u0) - grid.sample(data.Psi, 0.0)
        self.log_V0 = log_sum(0.0, log_integral(self.alpha * safe_log(ubar0), grid.cell_volume))
        self.ubar0_log_norm = log_norm(ubar0, self.alpha, grid.cell_volume)
        self.notes = []
        if self.L.valid:
            self.log_K = math.log(self.L.gamma) + self.L.log_C_star + self.L.gamma * self.log_V0
            self.t0, self.truncation = self._find_t0()
        else:
            self.log_K = math.nan
            self.t0, self.truncation = math.nan, None

    # -- pointwise fields ------------------------------------------------------
    def _fields(self, t):
        t = float(t)
        if t not in self._cache:
            if len(self._cache) > 64:
                self._cache.clear()
            d, g = self.spec.data, self.grid
            Psi = g.sample(d.Psi, t)
            gP = np.sqrt(sum(gi.at(g.centers, t) ** 2 for gi in d.grad_Psi))
            self._cache[t] = (Psi, gP, g.sample(d.Psi_t, t))
        return self._cache[t]

    @property
    def q_norm(self):
        r = self.L.r_star
        return 2 * r / (1 - r)

    def log_Psi_norm(self, t):
        return log_norm(self._fields(t)[0], self.q_norm, self.grid.cell_volume)

    def log_E(self, t):
        """``log E(t)``."""
        t = float(t)
        if t not in self._logE:
            self._logE[t] = self._log_E(t)
        return self._logE[t]

    def _log_E(self, t):
        L, a, al, lc, vol = self.L, self.a, self.alpha, self.log_chi, self.grid.cell_volume
        Psi, gP, Pt = self._fields(t)
        e = 2 * L.theta / (1 - L.theta)
        p = al + 4 * (1 - a)
        terms = [L.mu_bar * lc + log_sum(0.0, e * self.log_Psi_norm(t)),
                 (3 - 2 * a) * lc + log_integral(p * safe_log(Psi), vol),
                 (1 - a) * lc + log_integral(p / 2 * safe_log(gP), vol),
                 -(3 - 2 * a) * (al - 1) / (5 - 4 * a) * lc
                 + log_integral(p / (5 - 4 * a) * safe_log(Pt), vol)]
        return log_sum(*terms)

    def E(self, t):
        return to_float(self.log_E(t))

    def log_M(self, t):
        """``log M(t)``, the variant of ``E`` with ``1 + |Psi|`` and ``1 + |grad Psi|``."""
        a, al, lc, vol = self.a, self.alpha, self.log_chi, self.grid.cell_volume
        Psi, gP, Pt = self._fields(t)
        p = al + 4 * (1 - a)
        return log_sum((3 - 2 * a) * lc + log_integral(p * np.log1p(np.abs(Psi)), vol),
                       (1 - a) * lc + log_integral(p / 2 * np.log1p(gP), vol),
                       -(3 - 2 * a) * (al - 1) / (5 - 4 * a) * lc
                       + log_integral(p / (5 - 4 * a) * safe_log(Pt), vol))

    def log_int_E(self, t, t_lo=0.0):
        """``log int_{t_lo}^t E``."""
        if t <= t_lo:
            return -math.inf
        ts, ws = _gauss(t_lo, t)
        return log_sum(*[self.log_E(s) + math.log(w) for s, w in zip(ts, ws)])

    # -- admissible time and the bound on V ----------------------------------
    def log_budget(self, t):
        """``log(gamma C* V0^gamma int_0^t E)``."""
        return self.log_K + self.log_int_E(t)

    def _find_t0(self, iters=200):
        # geometric bisection: t0 can sit many decades below the horizon
        t_max = min(1.0, self.horizon)
        target = math.log(self.B)

        def root(lo, hi, level):
            for _ in range(iters):
                mid = math.sqrt(lo * hi)
                if self.log_budget(mid) <= level:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-15 * hi:
                    break
            return lo, hi

        floor = min(1e-280, 0.5 * t_max)  # stays clear of subnormals in the quadrature
        if self.log_budget(t_max) <= target:
            t0 = t_max
        elif self.log_budget(floor) > target:
            t0 = 0.0
        else:
            t0 = root(floor, t_max, target)[0]
        # first time the budget reaches 1 (where calV blows up), if before the horizon
        trunc = None
        if self.log_budget(self.horizon) >= 0.0:
            trunc = root(max(t0, floor), self.horizon, 0.0)[1]
            self.notes.append(f"calV blows up at t={trunc:.6g}, before the horizon {self.horizon:.6g}")
        return t0, trunc

    def log_calV(self, t):
        """``log calV(t)``; ``inf`` once the budget reaches 1."""
        lb = self.log_budget(t) if t > 0 else -math.inf
        if lb >= 0:
            return math.inf
        return self.log_V0 - math.log1p(-math.exp(lb)) / self.L.gamma

    def calV(self, t):
        return to_float(self.log_calV(t))

    @property
    def V0(self):
        return to_float(self.log_V0)

    # -- sup over windows ------------------------------------------------------
    def window_times(self, t_lo, t_hi):
        ts = self.times[(self.times > t_lo) & (self.times < t_hi)]
        if len(ts) == 0:
            # open window with no snapshot: fall back to its right end
            ts = np.array([t_hi])
        return ts

    def log_B_sigma(self, t, sigma):
        """``log(1 + max_{tau in (sigma t/2, t)} ||Psi(tau)||_{2r*/(1-r*)})`` over snapshot times."""
        ts = self.window_times(sigma * t / 2, t)
        if len(ts) < 8:
            msg = f"window ({sigma * t / 2:.4g}, {t:.4g}) holds {len(ts)} snapshots (< 8)"
            if msg not in self.notes:
                self.notes.append(msg)
        return log_sum(0.0, max(self.log_Psi_norm(s) for s in ts))

    def sup_abs_Psi(self, t):
        return float(np.max(np.abs(self.spec.data.Psi.at(self._pts, float(t)))))

    def sup_psi_boundary(self, t_lo, t_hi, n=64):
        """Max of ``psi`` over the box faces and ``[t_lo, t_hi]`` (uniform and snapshot times)."""
        pts = self.grid.boundary_points()
        ts = np.union1d(np.linspace(t_lo, t_hi, n), self.times[(self.times >= t_lo) & (self.times <= t_hi)])
        return max(float(np.max(self.spec.data.psi.at(pts, s))) for s in ts)

    # -- space-time functional ---------------------------------------------------
    def log_calM(self, t_lo, t_hi, q=None):
        """``log`` of the space-time functional of ``Psi`` on ``(t_lo, t_hi)`` with exponents ``q``."""
        if q is None:
            if self.moser is None:
                raise ValueError("exponents q are needed without Moser constants")
            q = self.moser.q
        q1, q2, q3, q4 = q
        a, lc, vol = self.a, self.log_chi, self.grid.cell_volume
        qt = 2 * max(2 - a, 3 - 2 * a)
        ts, ws = _gauss(t_lo, t_hi)
        parts = [[], [], [], []]
        for s, w in zip(ts, ws):
            Psi, gP, Pt = self._fields(s)
            lw = math.log(w)
            l1P, l1g = np.log1p(np.abs(Psi)), np.log1p(gP)
            parts[0].append(lw + log_integral((2 - a) * q1 * l1g, vol))
            parts[1].append(lw + log_integral(2 * (1 - a) * q2 * l1P + (2 - a) * q2 * l1g, vol))
            parts[2].append(lw + log_integral(qt * q3 * l1P, vol))
            parts[3].append(lw + log_integral(q4 * safe_log(Pt), vol))
        return log_sum(0.0,
                       (1 - a) * lc + log_sum(*parts[0]) / q1,
                       (1 - a) * lc + log_sum(*parts[1]) / q2,
                       (3 - a) * lc + log_sum(*parts[2]) / q3,
                       log_sum(*parts[3]) / q4)

    def log_M2(self, t):
        return self.log_calM(0.0, t)

    def summary(self):
        d = {"alpha": self.alpha, "chi_star": self.chi_star, "B": self.B, "t0": self.t0,
             "truncation": self.truncation, "V0": self.V0, "log_V0": self.log_V0,
             "horizon": self.horizon, "notes": list(self.notes)}
        if self.L.valid:
            d["E0"] = self.E(0.0)
        return d


def boundary_functionals(spec, consts, times, grid, B=0.5, horizon=None, u0=None):
    """Build :class:`BoundaryFunctionals` (see there for parameters)."""
    return BoundaryFunctionals(spec, consts, times, grid, B=B, horizon=horizon, u0=u0)


# ---------------------------------------------------------------------------
# reports

def _log10(x):
    return x / math.log(10.0) if math.isfinite(x) else (math.inf if x > 0 else -math.inf)


def digest(*objs):
    """SHA-256 over JSON-serialized inputs and raw array bytes."""
    h = hashlib.sha256()
    for o in objs:
        if isinstance(o, np.ndarray):
            h.update(np.ascontiguousarray(o, dtype=float).tobytes())
        else:
            h.update(json.dumps(o, sort_keys=True, default=str).encode())
    return h.hexdigest()[:16]


def trajectory_digest(traj):
    return digest([float(t) for t in traj.times], *[np.asarray(s) for s in traj.snapshots])


@dataclass
class EstimateReport:
    """Per-time comparison of a computed left side with a bound.

    ``passed`` is ``None`` when the check does not apply.
    """

    theorem: str
    valid: bool
    times: list = field(default_factory=list)
    log_lhs: list = field(default_factory=list)
    log_rhs: list = field(default_factory=list)
    passed: object = None
    notes: list = field(default_factory=list)
    digest: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def lhs(self):
        return [to_float(v) if v > -math.inf else 0.0 for v in self.log_lhs]

    @property
    def rhs(self):
        return [to_float(v) if v > -math.inf else 0.0 for v in self.log_rhs]

    @property
    def margins(self):
        return [log_margin(l, r) for l, r in zip(self.log_lhs, self.log_rhs)]

    @property
    def margin_min(self):
        m = self.margins
        return min(m) if m else None

    @property
    def status(self):
        return "n/a" if self.passed is None else ("pass" if self.passed else "fail")

    def to_dict(self):
        return {
            "theorem": self.theorem,
            "valid": self.valid,
            "times": [float(t) for t in self.times],
            "lhs": self.lhs,
            "rhs": self.rhs,
            "log10_lhs": [_log10(v) for v in self.log_lhs],
            "log10_rhs": [_log10(v) for v in self.log_rhs],
            "margin_min": self.margin_min,
            "pass": self.passed,
            "notes": list(self.notes),
            "digest": self.digest,
            **self.extra,
        }


def _finish(rep, slack=1e-12):
    if not rep.times:
        rep.passed = None  # nothing was compared
        return rep
    rhs_ok = all(math.isfinite(r) for r in rep.log_rhs)
    if not rhs_ok:
        rep.notes.append("bound is infinite at some checked time")
    rep.passed = bool(rhs_ok and all(l <= r + math.log1p(slack) for l, r in zip(rep.log_lhs, rep.log_rhs)))
    return rep


def not_applicable(theorem, reasons, dig=""):
    return EstimateReport(theorem, False, notes=[f"not applicable: {r}" for r in reasons], digest=dig)


def _ubar(traj, spec, i):
    return np.asarray(traj.snapshots[i]) - traj.grid.sample(spec.data.Psi, traj.times[i])


def _face_integrand_log(ubar, u_face_fn, alpha, a, grid):
    """log of the face-quadrature of ``(1+u)^-2 |grad ubar|^(2-a) |ubar|^(alpha-2)``.

    Gradients live on the faces normal to each axis (two-point normal difference,
    averaged central tangential differences, ``ubar = 0`` on the boundary).  Each
    face family tiles the box; boundary faces carry half weight and the three
    families are averaged.
    """
    from .solver import _face_gradient  # local: solver imports nothing from here

    P = np.pad(ubar, 1)
    for d in range(3):
        Pd = np.moveaxis(P, d, 0)
        Pd[0] = -Pd[1]
        Pd[-1] = -Pd[-2]
    # corner ghost values come from the last reflection; they do not enter the stencils
    logs = []
    for d in range(3):
        Pd = np.moveaxis(P, d, 0)
        tang = tuple(e for e in range(3) if e != d)
        mean, g = _face_gradient(Pd, d, grid.h, tang)
        for idx in (0, -1):
            mean[idx] = 0.0
            for e in tang:
                g[idx][..., e] = 0.0
        u_face = mean + np.moveaxis(u_face_fn(d), d, 0)
        w = np.ones(mean.shape[0])
        w[0] = w[-1] = 0.5
        f = (-2 * np.log1p(u_face) + (2 - a) * safe_log(np.linalg.norm(g, axis=-1))
             + (alpha - 2) * safe_log(mean)) + np.log(w)[:, None, None]
        logs.append(log_integral(f, grid.cell_volume))
    return log_sum(*logs) - math.log(3.0)


def check_theorem_32(traj, spec, functionals, lhs_scale=1.0, t_max=None):
    """``V(t) <= calV(t)`` at each snapshot and the mixed gradient integral bound.

    Snapshots after ``t0`` (or ``t_max``) are skipped.  ``lhs_scale`` multiplies
    every left side (negative controls).
    """
    F = functionals
    dig = digest(trajectory_digest(traj), F.L.to_dict(), F.summary(), lhs_scale)
    if not F.L.valid:
        return not_applicable("thm32", F.L.reasons, dig)
    t_end = min(F.t0, t_max) if t_max is not None else F.t0
    idx = [i for i, t in enumerate(traj.times) if t <= t_end * (1 + 1e-12)]
    rep = EstimateReport("thm32", True, digest=dig)
    rep.notes.append(f"alpha={F.alpha:g}, B={F.B:g}, t0={F.t0:.6g}")
    if len(idx) < len(traj.times):
        rep.notes.append(f"{len(traj.times) - len(idx)} snapshots after t0 skipped")
    ls = math.log(lhs_scale)
    al, a = F.alpha, F.a
    grid = traj.grid
    for i in idx:
        t = traj.times[i]
        ub = _ubar(traj, spec, i)
        logV = log_sum(0.0, log_integral(al * safe_log(ub), grid.cell_volume))
        rep.times.append(t)
        rep.log_lhs.append(logV + ls)
        rep.log_rhs.append(F.log_calV(t))
    # mixed term over [0, T] with T the last checked snapshot (trapezoid in time)
    if len(idx) >= 2:
        T = traj.times[idx[-1]]
        vals = []
        for i in idx:
            t = traj.times[i]
            ub = _ubar(traj, spec, i)
            vals.append(_face_integrand_log(
                ub, lambda d, t=t: spec.data.Psi.at(grid.face_centers(d), t), al, a, grid))
        lhs = log_trapezoid(vals, [traj.times[i] for i in idx])
        B_T = math.exp(F.log_budget(T))
        g = F.L.gamma
        rhs = (math.log(8 * F.chi_star / spec.constants.c4) + F.log_V0
               + math.log1p(B_T / (g * (1 - B_T) ** (1 + 1 / g))))
        rep.extra["mixed_term"] = {"T": T, "B_T": B_T, "log10_lhs": _log10(lhs + ls),
                                   "log10_rhs": _log10(rhs), "margin": log_margin(lhs + ls, rhs)}
        rep.times.append(T)
        rep.log_lhs.append(lhs + ls)
        rep.log_rhs.append(rhs)
        rep.notes.append("last entry is the mixed gradient integral over [0, T]")
    if not rep.times:
        rep.notes.append("no snapshot within [0, t0]")
    return _finish(rep)


def _moser_rhs_log(M, F, t, sigma, log_M2, log_Bs):
    al = M.beta1
    return (M.log_Cbar1 + M.omega1 * F.log_chi + M.omega2 * math.log1p(1.0 / (sigma * t))
            + M.omega4 * math.log1p(t) + M.omega2 * log_M2 + 2 * M.omega1 * log_Bs
            + (2 * M.omega1 + M.nu_tilde) / al * F.log_calV(t))


def check_theorem_45(traj, spec, functionals, sigma=0.5, lhs_scale=1.0):
    """``max |u_bar|`` over snapshots in ``(sigma t, t]`` against the ``L^infty`` bound, ``t <= t0``."""
    F = functionals
    M = F.moser
    if M is None:
        raise ValueError("functionals must be built from Moser constants")
    dig = digest(trajectory_digest(traj), M.to_dict(), F.summary(), sigma, lhs_scale)
    if not M.valid:
        return not_applicable("thm45", M.reasons, dig)
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    rep = EstimateReport("thm45", True, digest=dig)
    rep.notes.append(f"beta1={M.beta1:g}, B={F.B:g}, t0={F.t0:.6g}, sigma={sigma:g}")
    sups = [float(np.max(np.abs(_ubar(traj, spec, i)))) for i in range(len(traj))]
    ls = math.log(lhs_scale)
    for i, t in enumerate(traj.times):
        if t <= 0 or t > F.t0 * (1 + 1e-12):
            continue
        win = traj.window(sigma * t, t)
        lhs = max(sups[j] for j in win)
        rep.times.append(t)
        rep.log_lhs.append((math.log(lhs) if lhs > 0 else -math.inf) + ls)
        rep.log_rhs.append(_moser_rhs_log(M, F, t, sigma, F.log_M2(t), F.log_B_sigma(t, sigma)))
    if not rep.times:
        rep.notes.append("no snapshot within (0, t0]")
    rep.notes += [n for n in F.notes if n not in rep.notes]
    return _finish(rep)


def check_maximum_principle(traj, spec, C_mp=None, dt=None):
    """Interior max over snapshots ``t > 0`` against the parabolic-boundary max plus ``C_mp (h + dt)``.

    The report's verdict uses the tolerance; ``extra['raw_pass']`` records the
    verdict without it.
    """
    if len(traj) < 2:
        raise ValueError("need at least two snapshots")
    grid = traj.grid
    dig = digest(trajectory_digest(traj), C_mp, dt)
    umax = max(float(np.max(np.abs(s))) for s in traj.snapshots)
    C = 10.0 * umax if C_mp is None else float(C_mp)
    if dt is None:
        dt = float(traj.meta.get("dt_max", 0.0))
    eps = C * (grid.hmax + dt)
    pts = grid.boundary_points()
    T = traj.times[-1]
    ts = np.union1d(np.linspace(0.0, T, 65), traj.times)
    bmax = max(float(np.max(spec.data.psi.at(pts, s))) for s in ts)
    pmax = max(float(np.max(traj.snapshots[0])), bmax)
    rep = EstimateReport("thm51", True, digest=dig)
    raw = True
    for t, s in zip(traj.times[1:], traj.snapshots[1:]):
        m = float(np.max(s))
        raw &= m <= pmax
        rep.times.append(t)
        rep.log_lhs.append(math.log(m) if m > 0 else -math.inf)
        rep.log_rhs.append(math.log(pmax + eps))
    interior = max(float(np.max(s)) for s in traj.snapshots[1:])
    rep.extra.update({"parabolic_max": pmax, "interior_max": interior, "eps_num": eps,
                      "C_mp": C, "h": grid.hmax, "dt": dt, "raw_pass": bool(raw),
                      "excess": interior - pmax})
    rep.notes.append(f"eps_num = C_mp (h + dt) = {eps:.6g}")
    return _finish(rep)


def check_theorem_52(traj, spec, functionals, lhs_scale=1.0):
    """``sup_x u(t)`` against the short-time bound for ``t <= t0`` and the continuation bound after."""
    F = functionals
    M = F.moser
    if M is None:
        raise ValueError("functionals must be built from Moser constants")
    dig = digest(trajectory_digest(traj), M.to_dict(), F.summary(), lhs_scale)
    if not M.valid:
        return not_applicable("thm52", M.reasons, dig)
    rep = EstimateReport("thm52", True, digest=dig)
    t0 = F.t0
    rep.notes.append(f"beta1={M.beta1:g}, B={F.B:g}, t0={t0:.6g}")
    ls = math.log(lhs_scale)
    late = None
    ex = 2 * M.omega1 + M.nu_tilde
    for i, t in enumerate(traj.times):
        if t <= 0:
            continue
        sup_u = float(np.max(traj.snapshots[i]))
        lhs = (math.log(sup_u) if sup_u > 0 else -math.inf) + ls
        if t <= t0 * (1 + 1e-12):
            main = (M.log_Cbar2 + M.omega1 * F.log_chi - M.omega2 * math.log(t)
                    + M.omega2 * F.log_M2(t) + 2 * M.omega1 * F.log_B_sigma(t, 0.5)
                    + ex / M.beta1 * F.log_calV(t))
            rhs = log_sum(main, safe_log(F.sup_abs_Psi(t)).item())
        else:
            if late is None:
                M3 = -M.omega2 * math.log(t0) + M.omega2 * F.log_M2(t0) + 2 * M.omega1 * F.log_B_sigma(t0, 0.5)
                base = M.log_Cbar3 + M.omega1 * F.log_chi + M3 + ex * float(np.logaddexp(0.0, F.ubar0_log_norm))
                late = log_sum(base, safe_log(F.sup_abs_Psi(t0)).item())
                rep.extra["late_branch_from"] = t
            bnd = F.sup_psi_boundary(t0, t)
            rhs = max(late, math.log(bnd) if bnd > 0 else -math.inf)
        rep.times.append(t)
        rep.log_lhs.append(lhs)
        rep.log_rhs.append(rhs)
    rep.extra["t0"] = t0
    rep.extra["branches"] = {"short": sum(1 for t in rep.times if t <= t0 * (1 + 1e-12)),
                             "late": sum(1 for t in rep.times if t > t0 * (1 + 1e-12))}
    rep.notes += [n for n in F.notes if n not in rep.notes]
    return _finish(rep)
