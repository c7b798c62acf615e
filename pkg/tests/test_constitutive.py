import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

from forchlab.constitutive import (
    BOUND_IDS, ForchheimerLaw, InversionError, RotationMatrix, certify_bounds, eval_g,
    forward_map, invert_map, jacobian_y, jacobian_z, law_constants)

LAW = ForchheimerLaw((0, 1), (1, 1))
KZ = RotationMatrix((0, 0, 1))


def oracle_inverse(law, k, zr, y):
    """Independent inverse: |v| solves a scalar equation, then v = (gI + zJ)^{-1} y."""
    k = np.asarray(k, float) / np.linalg.norm(k)
    y = np.asarray(y, float)
    yp = (y @ k) * k
    yt = y - yp
    if not np.any(y):
        return np.zeros(3)

    def f(r):
        g = eval_g(law, r)
        return r - np.sqrt(yp @ yp / g**2 + yt @ yt / (g**2 + zr**2))

    r = brentq(f, 0.0, np.linalg.norm(y) / law.coefficients[0] + 1.0, xtol=1e-15, rtol=1e-15)
    g = eval_g(law, r)
    M = g * np.eye(3) + zr * RotationMatrix(k).J
    return np.linalg.solve(M, y)


def test_eval_g_examples():
    assert eval_g(LAW, 1.0) == 2.0
    assert eval_g(LAW, 0.0) == 1.0
    assert eval_g(LAW, 2.0) == 3.0
    with pytest.raises(ValueError):
        eval_g(LAW, -1.0)


def test_law_validation():
    with pytest.raises(ValueError):
        ForchheimerLaw((0,), (1,))
    with pytest.raises(ValueError):
        ForchheimerLaw((0, 1, 1), (1, 1, 1))
    with pytest.raises(ValueError):
        ForchheimerLaw((0, 1), (1, 0))
    with pytest.raises(ValueError):
        ForchheimerLaw((0.5, 1), (1, 1))


def test_constants_formulas():
    law = ForchheimerLaw((0, 0.5, 2.0), (0.5, 2.0, 3.0))
    c = law_constants(law)
    a = 2.0 / 3.0
    assert c.a == pytest.approx(a, abs=1e-15)
    assert c.chi0 == 5.5
    assert c.c1 == 1.0
    assert c.c2 == pytest.approx(2**a / 0.5)
    assert c.c3 == pytest.approx(3.0 ** (a - 1))
    assert c.c4 == pytest.approx((0.5 / 4) ** (1 + a))
    assert c.c5 == pytest.approx(2 ** (-a) * c.c4)
    assert c.c6 == pytest.approx(np.sqrt(3) * (0.25) ** a / 4)
    assert c.c7 == pytest.approx(np.sqrt(3) * 4 / 0.5)
    assert c.c8 == pytest.approx(c.c4 / 16)


def test_forward_map_examples():
    np.testing.assert_array_equal(forward_map(LAW, KZ, 0.0, [1, 0, 0]), [2, 0, 0])
    np.testing.assert_array_equal(forward_map(LAW, KZ, 1.0, [1, 0, 0]), [2, 1, 0])
    np.testing.assert_array_equal(forward_map(LAW, KZ, 3.0, [0, 0, 0]), [0, 0, 0])


def test_rotation_matrix_properties():
    rng = np.random.default_rng(1)
    R = RotationMatrix(rng.normal(size=3))
    np.testing.assert_allclose(R.J.T, -R.J)
    x = rng.normal(size=(200, 3))
    np.testing.assert_allclose(x @ R.J.T, R.apply(x), atol=1e-14)
    Jx = np.linalg.norm(R.apply(x), axis=1)
    JJx = np.linalg.norm(R.apply(R.apply(x)), axis=1)
    assert np.all(Jx <= np.linalg.norm(x, axis=1) + 1e-14)
    assert np.all(JJx <= Jx + 1e-14)


def test_invert_examples():
    np.testing.assert_allclose(invert_map(LAW, KZ, 1.0, 0.0, [2, 0, 0]), [1, 0, 0], atol=1e-13)
    np.testing.assert_array_equal(invert_map(LAW, KZ, 1.0, 4.0, [0, 0, 0]), [0, 0, 0])
    v = invert_map(LAW, KZ, 1.0, 1.0, [2, 0, 0])
    r = np.linalg.norm(v)
    # (1+r) v1 - v2 = 2, (1+r) v2 + v1 = 0
    assert (1 + r) * v[0] - v[1] == pytest.approx(2.0, abs=1e-12)
    assert (1 + r) * v[1] + v[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(v, oracle_inverse(LAW, (0, 0, 1), 1.0, [2, 0, 0]), atol=1e-12)


def test_invert_matches_scalar_oracle():
    rng = np.random.default_rng(7)
    law = ForchheimerLaw((0, 0.3, 1.7), (0.4, 2.0, 0.8))
    R = RotationMatrix(rng.normal(size=3))
    z = rng.uniform(0, 10, 200)
    y = rng.normal(size=(200, 3)) * 10 ** rng.uniform(-3, 3, (200, 1))
    v = invert_map(law, R, 1.3, z, y)
    for i in range(200):
        ref = oracle_inverse(law, R.axis, 1.3 * z[i], y[i])
        # the residual target is relative to 1 + |y|, and |D_y X| <= 1/a0
        assert np.linalg.norm(v[i] - ref) <= 1e-11 / 0.4 * (1 + np.linalg.norm(y[i]))


def test_warm_start_and_info():
    y = np.array([[3.0, -1.0, 2.0], [0.0, 0.0, 0.0]])
    v, info = invert_map(LAW, KZ, 2.0, 1.0, y, return_info=True)
    assert info["iterations"].max() <= 50
    v2, info2 = invert_map(LAW, KZ, 2.0, 1.0, y, guess=v, return_info=True)
    assert info2["iterations"].max() <= 1
    np.testing.assert_allclose(v2, v, atol=1e-13)


def test_inversion_error_reports_residual():
    with pytest.raises(InversionError) as exc:
        invert_map(LAW, KZ, 1.0, 5.0, [[1e3, 2e2, 0.1]], tol=1e-300, max_iter=2)
    assert exc.value.residual is not None and exc.value.residual > 0


@settings(max_examples=60, deadline=None)
@given(arrays(float, 3, elements=st.floats(-1e3, 1e3)), st.floats(0, 10))
def test_round_trip_and_oddness(y, z):
    v = invert_map(LAW, KZ, 0.8, z, y)
    assert np.linalg.norm(forward_map(LAW, KZ, 0.8 * z, v) - y) <= 1e-10 * (1 + np.linalg.norm(y))
    np.testing.assert_allclose(invert_map(LAW, KZ, 0.8, z, -y), -v, atol=1e-12 * (1 + np.abs(v).max()))


@settings(max_examples=60, deadline=None)
@given(arrays(float, (2, 3), elements=st.floats(-50, 50)), st.floats(0, 10))
def test_forward_map_monotone(v, z):
    d = v[0] - v[1]
    if np.linalg.norm(d) < 1e-9:
        return
    dF = forward_map(LAW, KZ, z, v[0]) - forward_map(LAW, KZ, z, v[1])
    assert dF @ d > 0


def test_jacobian_at_origin():
    np.testing.assert_allclose(jacobian_y(LAW, KZ, 1.0, 0.0, [0, 0, 0]), np.eye(3), atol=1e-15)
    D = jacobian_y(LAW, KZ, 1.0, 2.0, [0, 0, 0])
    np.testing.assert_allclose(D, np.linalg.inv(np.eye(3) + 2.0 * KZ.J), atol=1e-15)
    np.testing.assert_array_equal(jacobian_z(LAW, KZ, 1.0, 2.0, [0, 0, 0]), [0, 0, 0])
    np.testing.assert_array_equal(jacobian_z(LAW, KZ, 0.0, 2.0, [1, 2, 3]), [0, 0, 0])


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(3)
    law = ForchheimerLaw((0, 0.5, 1.5), (1.0, 0.7, 2.0))
    R = RotationMatrix((0.2, 0.3, 1.0))
    Rs = 1.5
    z = rng.uniform(0.5, 10, 100)
    y = rng.normal(size=(100, 3)) * 10 ** rng.uniform(-1, 3, (100, 1))
    D = jacobian_y(law, R, Rs, z, y)
    Dz = jacobian_z(law, R, Rs, z, y)
    h = 1e-6 * (1 + np.linalg.norm(y, axis=1))
    fd = np.empty_like(D)
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1
        fd[:, :, j] = (invert_map(law, R, Rs, z, y + h[:, None] * e)
                       - invert_map(law, R, Rs, z, y - h[:, None] * e)) / (2 * h[:, None])
    assert np.max(np.linalg.norm(fd - D, axis=(1, 2)) / np.linalg.norm(D, axis=(1, 2))) < 1e-5
    hz = 1e-6 * (1 + z)
    fdz = (invert_map(law, R, Rs, z + hz, y) - invert_map(law, R, Rs, z - hz, y)) / (2 * hz[:, None])
    assert np.max(np.linalg.norm(fdz - Dz, axis=1) / np.linalg.norm(Dz, axis=1)) < 1e-5


def test_symmetric_part_positive_definite():
    rng = np.random.default_rng(4)
    y = rng.normal(size=(300, 3)) * 100
    D = jacobian_y(LAW, KZ, 2.0, rng.uniform(0, 10, 300), y)
    assert np.all(np.linalg.eigvalsh(0.5 * (D + D.transpose(0, 2, 1)))[:, 0] > 0)


def test_growth_bound():
    c = law_constants(LAW)
    rng = np.random.default_rng(5)
    y = rng.normal(size=(500, 3)) * 10 ** rng.uniform(-2, 3, (500, 1))
    v = invert_map(LAW, KZ, 1.0, rng.uniform(0, 10, 500), y)
    assert np.all(np.linalg.norm(v, axis=1) <= c.c3 * np.linalg.norm(y, axis=1) ** (1 - c.a))


def test_certify_bounds_pass_and_serialize():
    reps = certify_bounds(LAW, KZ, 0.7, 2000, seed=11)
    assert [r.inequality_id for r in reps] == list(BOUND_IDS)
    assert all(r.passed for r in reps)
    d = reps[0].to_dict()
    assert set(d) == {"inequality_id", "samples", "min_margin", "witness", "pass"}


def test_certify_bounds_single_zero_sample():
    reps = certify_bounds(LAW, KZ, 0.7, 1, seed=0)
    assert all(r.passed for r in reps)


def test_corrupted_c4_is_detected():
    # a tenfold c4 already breaks the lower bound of X.y; the quadratic-form
    # bound has more slack and needs a larger corruption to trip
    reps = {r.inequality_id: r for r in
            certify_bounds(LAW, KZ, 0.7, 5000, seed=2, consts=law_constants(LAW, c4_scale=10))}
    assert not reps["X2"].passed
    reps = {r.inequality_id: r for r in
            certify_bounds(LAW, KZ, 0.7, 5000, seed=2, consts=law_constants(LAW, c4_scale=100))}
    assert not reps["hXh"].passed
    assert reps["hXh"].witness["lhs"] > reps["hXh"].witness["rhs"]
