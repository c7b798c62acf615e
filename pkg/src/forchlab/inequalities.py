"""Weighted Poincare-Sobolev inequalities and the Genn sequence lemma.

All checks are carried out in log space: the exponents involved (``alpha`` of
order 10 to 100) push plain floating point over- or underflow quickly.

The Sobolev constant is estimated empirically from probe fields, so every check
here is a consistency check of the implemented chain rather than a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .logspace import (log_integral, log_margin, log_norm, log_sum, log_trapezoid, safe_log,
                       to_float)


class InputError(ValueError):
    """Inputs outside the admissible class of a check."""


# ---------------------------------------------------------------------------
# exponents

@dataclass
class EllipticPSParams:
    n: float
    p: float
    r_star: float
    r: float
    s: float
    alpha: float
    m: float = math.nan
    theta: float = math.nan
    mu: float = math.nan
    q_bar: float = math.nan
    valid: bool = False
    reasons: list = field(default_factory=list)

    def identity_residual(self):
        """``(alpha + r) - theta (alpha - s + p) - (1 - theta)(alpha + mu)``."""
        a, r, s, p, th, mu = self.alpha, self.r, self.s, self.p, self.theta, self.mu
        return (a + r) - th * (a - s + p) - (1 - th) * (a + mu)


def _powcond(n, p, r_star):
    reasons = []
    if not n / (n + p) < r_star < 1:
        reasons.append(f"need n/(n+p) < r_star < 1, got r_star={r_star} with n/(n+p)={n / (n + p):.6g}")
    if not (1 / p <= r_star < n / p):
        reasons.append(f"need 1/p <= r_star < n/p, got r_star={r_star}, p={p}")
    return reasons


def elliptic_ps_params(n, p, r_star, r, s, alpha):
    """Exponents ``m, theta, mu`` of the elliptic weighted inequality and its validity.

    Examples
    --------
    >>> P = elliptic_ps_params(3, 1.5, 0.9, 2, 2, 20)
    >>> round(P.theta, 6)
    0.274809
    """
    P = EllipticPSParams(n, p, r_star, r, s, alpha)
    reasons = _powcond(n, p, r_star)
    gap = r_star * (n + p) - n
    if not r > 0:
        reasons.append(f"need r > 0, got {r}")
    if not alpha > 0:
        reasons.append(f"need alpha > 0, got {alpha}")
    if not alpha >= s >= 0:
        reasons.append(f"need alpha >= s >= 0, got alpha={alpha}, s={s}")
    if gap > 0 and not alpha > n * r_star * (r - p + s) / gap:
        reasons.append(f"need alpha > {n * r_star * (r - p + s) / gap:.6g}")
    P.m = (alpha - s + p) / p
    den = n * r_star * (p - s) + alpha * gap
    if den != 0:
        P.theta = r * n * r_star / den
        if P.theta != 1:
            P.mu = (r + P.theta * (s - p)) / (1 - P.theta)
    if n - r_star * p != 0:
        P.q_bar = n * r_star * (alpha - s + p) / (n - r_star * p)
    P.reasons = reasons
    P.valid = not reasons
    return P


@dataclass
class ParabolicPSParams:
    n: float
    p: float
    r_star: float
    s: float
    alpha: float
    m: float = math.nan
    kappa: float = math.nan
    theta_tilde: float = math.nan
    valid: bool = False
    reasons: list = field(default_factory=list)


def parabolic_ps_params(n, p, r_star, s, alpha):
    """``kappa`` and ``theta~`` of the parabolic multiplicative inequality.

    Examples
    --------
    >>> round(parabolic_ps_params(3, 1.5, 0.9, 2, 20).kappa, 6)
    1.363889
    """
    P = ParabolicPSParams(n, p, r_star, s, alpha)
    reasons = _powcond(n, p, r_star)
    gap = r_star * (n + p) - n
    if not alpha > 0:
        reasons.append(f"need alpha > 0, got {alpha}")
    if not alpha >= s:
        reasons.append(f"need alpha >= s, got alpha={alpha}, s={s}")
    if gap > 0 and not alpha > (s - p) * n * r_star / gap:
        reasons.append(f"need alpha > {(s - p) * n * r_star / gap:.6g}")
    P.m = (alpha - s + p) / p
    P.kappa = 1 + gap / (n * r_star) + (p - s) / alpha
    if alpha - s + p != 0:
        P.theta_tilde = 1 / (1 + alpha * gap / (n * r_star * (alpha - s + p)))
    P.reasons = reasons
    P.valid = not reasons
    return P


# ---------------------------------------------------------------------------
# checks on grid fields

def _result(log_lhs, log_rhs, slack, **extra):
    ok = log_lhs <= log_rhs + math.log1p(slack)
    out = {"lhs": to_float(log_lhs), "rhs": to_float(log_rhs),
           "log10_lhs": log_lhs / math.log(10), "log10_rhs": log_rhs / math.log(10),
           "margin": log_margin(log_lhs, log_rhs), "pass": bool(ok)}
    out.update(extra)
    return out


def _grad_norm(u, grid):
    return np.linalg.norm(grid.gradient(u, boundary=0.0), axis=-1)


def check_elliptic_ps(u, W, params, eps, bar_c, grid, slack=1e-12):
    """Both sides of the elliptic weighted inequality for ``u`` vanishing on the boundary.

    Parameters
    ----------
    u, W : ndarray
        Cell fields; ``W`` must be positive.
    params : EllipticPSParams
    eps : float
        The splitting parameter, ``eps > 0``.
    bar_c : float
        Sobolev constant (see :func:`estimate_sobolev_constant`).
    grid : Grid
    """
    W = np.asarray(W, dtype=float)
    if np.any(W <= 0):
        raise InputError("the weight W must be positive")
    if not params.valid:
        raise InputError("parameters are not admissible: " + "; ".join(params.reasons))
    P = params
    th = P.theta
    vol = grid.cell_volume
    lu = safe_log(u)
    lgu = safe_log(_grad_norm(u, grid))
    log_lhs = log_integral((P.alpha + P.r) * lu, vol)
    log_grad = log_integral((P.alpha - P.s) * lu + P.p * lgu + np.log(W), vol)
    t1 = math.log(eps) + log_grad
    t2 = (-th / (1 - th) * math.log(eps) + th * P.p / (1 - th) * math.log(bar_c * P.m)
          + (P.alpha + P.mu) * log_norm(u, P.alpha, vol)
          + th / (1 - th) * log_norm(1.0 / W, P.r_star / (1 - P.r_star), vol))
    return _result(log_lhs, log_sum(t1, t2), slack)


def check_weighted_variants(u, phi, params, beta, eps, bar_c, grid, slack=1e-12):
    """Both variants with the solution-dependent weight ``(1 + |u + phi|)^(-beta)``.

    Variant ``"i"`` is always applicable; variant ``"ii"`` needs
    ``alpha >= beta r_star / (1 - r_star)`` and is otherwise marked not applicable.
    """
    if not params.valid:
        raise InputError("parameters are not admissible: " + "; ".join(params.reasons))
    P = params
    th = P.theta
    vol = grid.cell_volume
    u = np.asarray(u, dtype=float)
    phi = np.broadcast_to(np.asarray(phi, dtype=float), u.shape)
    v = u + phi
    lu = safe_log(u)
    log_lhs = log_integral((P.alpha + P.r) * lu, vol)
    lw = -beta * np.log1p(np.abs(v))
    t1 = math.log(eps) + log_integral((P.alpha - P.s) * lu + P.p * safe_log(_grad_norm(u, grid)) + lw, vol)
    q = beta * P.r_star / (1 - P.r_star)
    e = beta * th / (1 - th)
    pre = (th * (1 + (beta - 1) * P.r_star) / ((1 - th) * P.r_star) * math.log(2.0)
           - th / (1 - th) * math.log(eps) + th * P.p / (1 - th) * math.log(bar_c * P.m))
    la = log_norm(u, P.alpha, vol)
    lphi = e * log_norm(1.0 + np.abs(phi), q, vol)
    rhs_i = log_sum(t1, pre + (P.alpha + P.mu) * la + log_sum(e * log_norm(u, q, vol), lphi))
    out = {"i": _result(log_lhs, rhs_i, slack)}
    if P.alpha >= q:
        lU = math.log(grid.domain.volume)
        k = th * (P.alpha * (1 - P.r_star) - beta * P.r_star) / (P.alpha * P.r_star * (1 - th))
        rhs_ii = log_sum(t1, pre + log_sum(k * lU + (P.alpha + P.mu + e) * la,
                                           (P.alpha + P.mu) * la + lphi))
        out["ii"] = _result(log_lhs, rhs_ii, slack)
    else:
        out["ii"] = {"applicable": False, "pass": True,
                     "note": f"alpha={P.alpha} below beta r*/(1-r*)={q:.6g}"}
    return out


def check_parabolic_ps(times, ubar, phi, params, beta, bar_c, grid, slack=1e-12):
    """Space-time ``L^(kappa alpha)`` norm of ``ubar`` against the multiplicative bound.

    Parameters
    ----------
    times : sequence of float
    ubar, phi : sequence of ndarray
        Snapshots of the shifted field (vanishing on the boundary) and of the
        shift, so the weight is ``(1 + |ubar + phi|)^(-beta)``.
    params : ParabolicPSParams
    """
    if len(times) == 0 or len(ubar) == 0:
        raise InputError("empty trajectory")
    if not params.valid:
        raise InputError("parameters are not admissible: " + "; ".join(params.reasons))
    P = params
    vol = grid.cell_volume
    ka = P.kappa * P.alpha
    q = beta * P.r_star / (1 - P.r_star)
    l_lhs, l_grad, sup_phi, sup_u, sup_a = [], [], -math.inf, -math.inf, -math.inf
    for u, ph in zip(ubar, phi):
        u = np.asarray(u, dtype=float)
        ph = np.broadcast_to(np.asarray(ph, dtype=float), u.shape)
        lu = safe_log(u)
        l_lhs.append(log_integral(ka * lu, vol))
        lw = -beta * np.log1p(np.abs(u + ph))
        l_grad.append(log_integral((P.alpha - P.s) * lu + P.p * safe_log(_grad_norm(u, grid)) + lw, vol))
        sup_phi = max(sup_phi, beta * log_norm(1.0 + np.abs(ph), q, vol))
        sup_u = max(sup_u, beta * log_norm(u, q, vol))
        sup_a = max(sup_a, log_norm(u, P.alpha, vol))
    log_lhs = log_trapezoid(l_lhs, times) / ka
    log_rhs = ((beta + (1 - P.r_star) / P.r_star) / ka * math.log(2.0)
               + P.p / ka * math.log(bar_c * P.m) + log_sum(sup_phi, sup_u) / ka
               + (1 - P.theta_tilde) * sup_a + log_trapezoid(l_grad, times) / ka)
    return _result(log_lhs, log_rhs, slack)


# ---------------------------------------------------------------------------
# Sobolev constant

def sobolev_ratio(w, grid, p_bar):
    """``||w||_{p*} / ||grad w||_{p}`` with ``p* = 3 p / (3 - p)`` by quadrature."""
    ps = 3 * p_bar / (3 - p_bar)
    vol = grid.cell_volume
    num = log_norm(w, ps, vol)
    den = log_norm(_grad_norm(w, grid), p_bar, vol)
    return math.exp(num - den)


def _probe(rng, grid):
    xi = (grid.centers - grid.lower) / np.array(grid.domain.extent)
    w = np.zeros(grid.shape)
    for _ in range(rng.integers(1, 4)):
        k = rng.integers(1, 4, size=3)
        w += rng.normal() * np.prod(np.sin(np.pi * k * xi), axis=-1)
    return np.abs(w) ** rng.uniform(1.0, 3.0)


def estimate_sobolev_constant(grid, p_bar, n_probes=200, seed=0, return_ratios=False):
    """Empirical Sobolev constant: twice the largest probe ratio.

    Probes are random combinations of low sine modes vanishing on the box
    boundary, raised to a random power in [1, 3].  They are drawn sequentially
    from one seeded stream, so a larger ``n_probes`` sees a superset of probes
    and the estimate is non-decreasing in ``n_probes``.
    """
    if not 1 <= p_bar < 3:
        raise InputError("need 1 <= p_bar < 3")
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(n_probes):
        w = _probe(rng, grid)
        if np.any(w):
            ratios.append(sobolev_ratio(w, grid, p_bar))
    value = 2.0 * max(ratios)
    return (value, ratios) if return_ratios else value


# ---------------------------------------------------------------------------
# Genn sequence lemma

@dataclass
class GennInput:
    """Sequences of the recurrence ``y_{j+1} <= A^(w_j/k_j) (y_j^r_j + y_j^s_j)^(1/k_j)``.

    ``omega``, ``kappa``, ``r`` and ``s`` map an integer array ``j`` to values.
    """

    omega: object
    kappa: object
    r: object
    s: object
    y0: float
    A: float
    tail_tol: float = 1e-10
    J_min: int = 32
    J_max: int = 1 << 16


def _geometric_tail(terms):
    t = np.abs(np.asarray(terms[-8:], dtype=float))
    if np.all(t == 0):
        return 0.0
    if np.any(t[:-1] == 0):
        return math.inf
    rho = float(np.max(t[1:] / t[:-1]))
    if rho >= 1:
        return math.inf
    return float(t[-1] * rho / (1 - rho))


def genn_bound(inp):
    """Closed-form bound of the Genn lemma versus direct iteration at equality.

    Returns
    -------
    dict
        ``bound`` and ``log_bound`` (the limit bound), ``direct_max`` (the
        largest iterate), ``direct_last``, ``J``, the series quantities
        ``alpha_bar, beta_bar, gamma_bar, G``, and the verdicts
        ``finite_pass`` (every iterate below its finite-index bound),
        ``limit_pass`` and ``pass``.
    """
    if inp.y0 < 0 or inp.A < 1:
        raise InputError("need y0 >= 0 and A >= 1")
    J = inp.J_min
    while True:
        j = np.arange(J)
        om, ka = np.asarray(inp.omega(j), float), np.asarray(inp.kappa(j), float)
        r, s = np.asarray(inp.r(j), float), np.asarray(inp.s(j), float)
        if np.any(om < 1) or np.any(ka <= 0) or np.any(r <= 0) or np.any(s < r):
            raise InputError("need omega_j >= 1, kappa_j > 0 and s_j >= r_j > 0")
        w = om / ka
        lb, lg = np.log(r / ka), np.log(s / ka)
        tails = [_geometric_tail(w), _geometric_tail(lb), _geometric_tail(lg)]
        if max(tails) < inp.tail_tol:
            break
        if J >= inp.J_max:
            raise InputError(f"series do not settle below {inp.tail_tol} by J={J} "
                             f"(tails {tails}); sum of omega_j/kappa_j may diverge")
        J *= 2
    t_w, t_b, t_g = tails
    alpha_bar = float(np.sum(w) + t_w)
    log_beta_bar, log_gamma_bar = float(np.sum(lb)), float(np.sum(lg))
    # G_j: largest product gamma_m..gamma_n over 1 <= m <= n < j (Kadane on logs)
    logG = np.zeros(J + 1)
    best_end, best = -math.inf, 0.0
    for n in range(1, J):
        best_end = lg[n] if best_end == -math.inf else max(lg[n], best_end + lg[n])
        best = max(best, best_end)
        logG[n + 1] = best
    logG_lim = logG[J] + t_g
    l2A = math.log(2 * inp.A)
    ly0 = math.log(inp.y0) if inp.y0 > 0 else -math.inf
    # direct iteration at equality
    ly = np.empty(J + 1)
    ly[0] = ly0
    lA = math.log(inp.A)
    for i in range(J):
        if ly[i] == -math.inf:
            ly[i + 1] = -math.inf  # zero stays zero
            continue
        ly[i + 1] = w[i] * lA + np.logaddexp(r[i] * ly[i], s[i] * ly[i]) / ka[i]
    cb = np.concatenate([[0.0], np.cumsum(lb)])
    cg = np.concatenate([[0.0], np.cumsum(lg)])
    if ly0 == -math.inf:
        lmax_fin = np.full(J + 1, -math.inf)
        lmax_lim = -math.inf
    else:
        lmax_fin = np.maximum(np.exp(cg) * ly0, np.exp(cb) * ly0)
        lmax_lim = max(math.exp(log_gamma_bar) * ly0, math.exp(log_beta_bar) * ly0)
    lbound_fin = np.exp(logG) * alpha_bar * l2A + lmax_fin
    log_bound = math.exp(logG_lim) * alpha_bar * l2A + lmax_lim

    def within(a, b, rel):
        return a <= b + rel * max(1.0, abs(b)) if np.isfinite(b) else a <= b

    finite_pass = all(within(ly[i], lbound_fin[i], 1e-12) for i in range(1, J + 1))
    limit_pass = within(ly[J], log_bound, 1e-9)
    direct_max = float(np.max(ly))
    return {
        "J": int(J),
        "alpha_bar": alpha_bar,
        "beta_bar": math.exp(log_beta_bar),
        "gamma_bar": math.exp(log_gamma_bar),
        "G": math.exp(logG_lim),
        "log_bound": log_bound,
        "bound": to_float(log_bound),
        "direct_last": to_float(ly[J]) if ly[J] > -math.inf else 0.0,
        "direct_max": to_float(direct_max) if direct_max > -math.inf else 0.0,
        "finite_pass": bool(finite_pass),
        "limit_pass": bool(limit_pass),
        "pass": bool(finite_pass and limit_pass),
    }


def random_admissible_genn(rng):
    """A seeded admissible input of Moser type.

    ``kappa_j = k^j a0``, ``omega_j = w (j + 1)``, ``r_j = kappa_j - x`` and
    ``s_j = kappa_j + y``, so the products of ``r_j/kappa_j`` and ``s_j/kappa_j``
    converge and ``sum omega_j/kappa_j`` is finite.
    """
    k = rng.uniform(1.05, 2.0)
    a0 = rng.uniform(3.0, 50.0)
    w = rng.uniform(1.0, 3.0)
    x = rng.uniform(0.0, 2.0)
    yy = rng.uniform(0.0, 3.0)
    return GennInput(
        omega=lambda j: w * (j + 1.0),
        kappa=lambda j: k ** j * a0,
        r=lambda j: k ** j * a0 - x,
        s=lambda j: k ** j * a0 + yy,
        y0=float(rng.choice([0.0, rng.uniform(0.0, 1.0), rng.uniform(1.0, 10.0)])),
        A=float(10 ** rng.uniform(0.0, 2.0)),
    )
