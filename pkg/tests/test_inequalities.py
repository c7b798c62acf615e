import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forchlab.grid import Grid
from forchlab.inequalities import (GennInput, InputError, check_elliptic_ps, check_parabolic_ps,
                                   check_weighted_variants, elliptic_ps_params, estimate_sobolev_constant,
                                   genn_bound, parabolic_ps_params, random_admissible_genn, sobolev_ratio)

G16 = Grid(16)
X = G16.centers
U = np.prod(np.sin(np.pi * X), axis=-1)
ONE = np.ones(G16.shape)
P20 = elliptic_ps_params(3, 1.5, 0.9, 2, 2, 20)


@pytest.fixture(scope="module")
def bar_c():
    return estimate_sobolev_constant(G16, 1.35)


# ---------------------------------------------------------------------------
# exponents

def test_elliptic_theta_hand_value():
    assert P20.valid
    assert P20.theta == pytest.approx(5.4 / 19.65, rel=1e-14)
    assert P20.m == pytest.approx((20 - 2 + 1.5) / 1.5)
    assert abs(P20.identity_residual()) < 1e-12


def test_elliptic_r_to_zero():
    P = elliptic_ps_params(3, 1.5, 0.9, 1e-12, 2, 20)
    assert P.theta < 1e-12 and abs(P.mu) < 1e-11


def test_elliptic_alpha_below_s_invalid():
    P = elliptic_ps_params(3, 1.5, 0.9, 2, 25, 20)
    assert not P.valid and any("alpha >= s" in r for r in P.reasons)


def test_powcond_violation_invalid():
    assert not elliptic_ps_params(3, 1.5, 0.6, 2, 2, 20).valid
    assert not parabolic_ps_params(3, 1.5, 1.0, 2, 20).valid


@st.composite
def elliptic_draws(draw):
    n = 3
    p = draw(st.floats(1.05, 2.0))
    lo = max(n / (n + p), 1 / p)
    r_star = draw(st.floats(lo + 1e-3, 0.999))
    r = draw(st.floats(0.01, 5.0))
    s = draw(st.floats(0.0, 4.0))
    gap = r_star * (n + p) - n
    a_min = max(s, n * r_star * (r - p + s) / gap, 1e-3)
    alpha = a_min + draw(st.floats(1e-3, 200.0))
    return n, p, r_star, r, s, alpha


@settings(max_examples=300, deadline=None)
@given(elliptic_draws())
def test_elliptic_exponent_properties(args):
    P = elliptic_ps_params(*args)
    assert P.valid, P.reasons
    assert 0 < P.theta < 1
    assert P.mu > -P.alpha
    scale = max(1.0, P.alpha)
    assert abs(P.identity_residual()) <= 1e-12 * scale


def test_parabolic_kappa_formula_value():
    P = parabolic_ps_params(3, 1.5, 0.9, 2, 20)
    assert P.valid
    # 1 + (0.9*4.5 - 3)/2.7 - 0.5/20
    assert P.kappa == pytest.approx(1 + 1.05 / 2.7 - 0.025, rel=1e-14)
    assert round(P.kappa, 6) == 1.363889


@settings(max_examples=300, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(0.0, 1.0), st.floats(0.0, 200.0))
def test_parabolic_kappa_matches_lambda0_form(a, t, extra):
    # specialization n=3, p=2-a, s=2 gives kappa = 1 + lambda0 - a/alpha
    p = 2 - a
    lo = 3 / (5 - a)
    r_star = lo + t * (1 - lo) * 0.999 + 1e-6 * (1 - lo)
    if r_star < 1 / p:
        r_star = 1 / p + 1e-6
    if not r_star < 1:
        return
    gap = r_star * (3 + p) - 3
    alpha = max(2.0, a * 3 * r_star / gap) + 1e-3 + extra
    P = parabolic_ps_params(3, p, r_star, 2, alpha)
    assert P.valid, P.reasons
    lam0 = gap / (3 * r_star)
    assert P.kappa == pytest.approx(1 + lam0 - a / alpha, rel=1e-13)
    assert P.kappa > 1 and 0 < P.theta_tilde < 1


# ---------------------------------------------------------------------------
# field checks

def test_elliptic_zero_field(bar_c):
    res = check_elliptic_ps(np.zeros(G16.shape), ONE, P20, 1.0, bar_c, G16)
    assert res["lhs"] == 0 and res["pass"]


def test_elliptic_sine_passes(bar_c):
    assert check_elliptic_ps(U, ONE, P20, 1.0, bar_c, G16)["pass"]


@pytest.mark.parametrize("lam", [0.1, 10.0])
@pytest.mark.parametrize("eps", [0.1, 1.0, 10.0])
def test_elliptic_scaling_sweep(bar_c, lam, eps):
    base = check_elliptic_ps(U, ONE, P20, eps, bar_c, G16)
    res = check_elliptic_ps(lam * U, ONE, P20, eps, bar_c, G16)
    assert res["pass"]
    # lhs is homogeneous of degree alpha + r
    assert math.log(res["lhs"]) - math.log(base["lhs"]) == pytest.approx((P20.alpha + P20.r) * math.log(lam),
                                                                          rel=1e-10)


def test_elliptic_nonpositive_weight_rejected(bar_c):
    W = ONE.copy()
    W[0, 0, 0] = 0.0
    with pytest.raises(InputError):
        check_elliptic_ps(U, W, P20, 1.0, bar_c, G16)


def test_elliptic_invalid_params_rejected(bar_c):
    with pytest.raises(InputError):
        check_elliptic_ps(U, ONE, elliptic_ps_params(3, 1.5, 0.9, 2, 2, 5), 1.0, bar_c, G16)


def test_weighted_variants_pass(bar_c):
    out = check_weighted_variants(U, X[..., 0], P20, 2.0, 1.0, bar_c, G16)
    assert out["i"]["pass"] and out["ii"]["pass"]


def test_weighted_beta_to_zero_limit(bar_c):
    plain = check_elliptic_ps(U, ONE, P20, 1.0, bar_c, G16)
    w = check_weighted_variants(U, np.zeros(G16.shape), P20, 1e-12, 1.0, bar_c, G16)["i"]
    assert w["lhs"] == pytest.approx(plain["lhs"], rel=1e-12)
    # in the limit the second term carries the constant 2 * 2^(theta (1 - r*) / ((1 - theta) r*))
    th, rs = P20.theta, P20.r_star
    factor = 2.0 * 2 ** (th * (1 - rs) / ((1 - th) * rs))
    assert plain["rhs"] <= w["rhs"] <= factor * plain["rhs"] * (1 + 1e-9)


def test_weighted_variant_ii_not_applicable(bar_c):
    out = check_weighted_variants(U, X[..., 0], P20, 3.0, 1.0, bar_c, G16)
    assert out["ii"]["applicable"] is False
    assert out["i"]["pass"]


def test_parabolic_zero_trajectory(bar_c):
    Q = parabolic_ps_params(3, 1.5, 0.9, 2, 20)
    ts = np.linspace(0, 1, 5)
    res = check_parabolic_ps(ts, [0 * U] * 5, [X[..., 0]] * 5, Q, 1.0, bar_c, G16)
    assert res["lhs"] == 0 and res["pass"]


def test_parabolic_smooth_trajectory(bar_c):
    Q = parabolic_ps_params(3, 1.5, 0.9, 2, 20)
    ts = np.linspace(0, 1, 11)
    res = check_parabolic_ps(ts, [U * np.exp(-t) for t in ts], [X[..., 0]] * 11, Q, 1.0, bar_c, G16)
    assert res["pass"] and res["margin"] > 0


def test_parabolic_empty_trajectory(bar_c):
    with pytest.raises(InputError):
        check_parabolic_ps([], [], [], parabolic_ps_params(3, 1.5, 0.9, 2, 20), 1.0, bar_c, G16)


# ---------------------------------------------------------------------------
# Sobolev constant

def test_sobolev_single_probe_below_estimate(bar_c):
    assert sobolev_ratio(U, G16, 1.35) <= bar_c


def test_sobolev_safety_factor_two():
    val, ratios = estimate_sobolev_constant(Grid(8), 1.35, n_probes=50, return_ratios=True)
    assert val == 2.0 * max(ratios)


def test_sobolev_monotone_in_probe_count():
    g = Grid(8)
    vals = [estimate_sobolev_constant(g, 1.35, n_probes=k) for k in (10, 50, 200)]
    assert vals[0] <= vals[1] <= vals[2]


def test_sobolev_rejects_bad_exponent():
    with pytest.raises(InputError):
        estimate_sobolev_constant(Grid(4), 3.0)


def test_probe_family_consistency(bar_c):
    # every probe of the family passes the elliptic check with the estimated constant
    rng = np.random.default_rng(0)
    from forchlab.inequalities import _probe
    for _ in range(20):
        w = _probe(rng, G16)
        assert check_elliptic_ps(w, ONE, P20, 1.0, bar_c, G16)["pass"]


# ---------------------------------------------------------------------------
# Genn lemma

def _moser_like(r_shift, s_shift, A, y0, kt=1.2, a0=20.0):
    return GennInput(omega=lambda j: np.ones_like(j, dtype=float), kappa=lambda j: kt ** j * a0,
                     r=lambda j: kt ** j * a0 - r_shift, s=lambda j: kt ** j * a0 + s_shift, y0=y0, A=A)


def test_genn_fixed_point():
    out = genn_bound(_moser_like(0.0, 0.0, 1.0, 1.0))
    assert out["beta_bar"] == 1.0 and out["gamma_bar"] == 1.0 and out["G"] == 1.0
    # y_{j+1} = 2^(1/kappa_j) y_j at equality, so the iterates climb to exactly the bound 2^alpha_bar
    assert out["bound"] == pytest.approx(2 ** out["alpha_bar"], rel=1e-12)
    assert out["direct_last"] == pytest.approx(out["bound"], rel=1e-9)
    assert out["alpha_bar"] == pytest.approx(1 / (20 * (1 - 1 / 1.2)), rel=1e-9)
    assert out["pass"]


def test_genn_shifted_sequences():
    out = genn_bound(_moser_like(2.0, 2.0, 3.0, 2.0))
    assert out["pass"] and out["direct_last"] <= out["bound"]


def test_genn_zero_start():
    out = genn_bound(_moser_like(2.0, 2.0, 3.0, 0.0))
    assert out["direct_max"] == 0.0 and out["pass"]


def test_genn_divergent_series_rejected():
    inp = GennInput(omega=lambda j: np.ones_like(j, dtype=float), kappa=lambda j: 1.0 + 0 * j,
                    r=lambda j: 1.0 + 0 * j, s=lambda j: 1.0 + 0 * j, y0=1.0, A=2.0, J_max=256)
    with pytest.raises(InputError):
        genn_bound(inp)


def test_genn_bad_inputs_rejected():
    with pytest.raises(InputError):
        genn_bound(_moser_like(0.0, 0.0, 0.5, 1.0))
    with pytest.raises(InputError):
        genn_bound(_moser_like(0.0, 0.0, 1.0, -1.0))


def test_genn_randomized_admissible_draws():
    rng = np.random.default_rng(12345)
    fails = [i for i in range(1000) if not genn_bound(random_admissible_genn(rng))["pass"]]
    assert fails == []
