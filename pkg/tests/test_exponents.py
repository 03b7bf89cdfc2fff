import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varlex.exponents import (
    ExponentField,
    ExponentRangeError,
    conjugate_exponent,
    derive_exponent,
    essential_bounds,
    estimate_lh_constants,
    eval_exponent,
    harmonic_mean,
    interpolate_exponent,
)
from varlex.grid import Box, Cube, make_grid, save_grid_function

rng = np.random.default_rng(7)
POINTS = rng.uniform(-20, 20, size=(400, 3))


def lh_fields():
    return [
        ExponentField.lh_infinity(2.0, 1.0),
        ExponentField.lh_infinity(1.4, 0.2),
        ExponentField.radial_affine(-1.0, 3.0, 2.0, 3.0),
        ExponentField.radial_affine(0.25, 1.5, 1.5, 4.0),
    ]


def test_constant_and_lh_family_values():
    assert eval_exponent(ExponentField.constant(2.5), [0.3, -1.0]) == 2.5
    p = ExponentField.lh_infinity(2.0, 1.0)
    assert np.isclose(p(np.zeros(2)), 3.0)
    r = np.logspace(-2, 8, 50)
    vals = p(r[:, None])
    assert np.all(np.diff(vals) < 0)
    assert np.all(vals > 2.0)


def test_range_is_enforced():
    bad = ExponentField.from_callable(lambda x: 1.5 + x[..., 0], 1.5, 2.0)
    with pytest.raises(ExponentRangeError):
        bad(np.array([[2.0]]))
    with pytest.raises(ValueError):
        ExponentField.constant(1.0)


def test_conjugate_examples():
    assert conjugate_exponent(ExponentField.constant(2.0)).params["value"] == 2.0
    assert np.isclose(conjugate_exponent(ExponentField.constant(1.5)).params["value"], 3.0)
    p = ExponentField.radial_affine(1.0, 2.0, 2.0, 3.0)
    c = conjugate_exponent(p)
    assert np.isclose(c.p_minus, 1.5) and np.isclose(c.p_plus, 2.0)


@pytest.mark.parametrize("p", lh_fields())
def test_conjugate_involution_and_bounds(p):
    cc = conjugate_exponent(conjugate_exponent(p))
    assert np.allclose(cc(POINTS), p(POINTS), rtol=1e-13)
    c = conjugate_exponent(p)
    assert np.isclose(c.p_plus, p.p_minus / (p.p_minus - 1))
    assert np.isclose(c.p_minus, p.p_plus / (p.p_plus - 1))
    assert np.allclose(1 / p(POINTS) + 1 / c(POINTS), 1.0)


def test_essential_bounds():
    assert essential_bounds(ExponentField.constant(2.5), Box.cube(3.0, 2)) == (2.5, 2.5)
    lo, hi = essential_bounds(ExponentField.lh_infinity(2.0, 1.0), Box((0.0,), (10.0,)))
    assert np.isclose(lo, 2 + 1 / math.log(math.e + 10))
    assert np.isclose(hi, 3.0)


def test_essential_bounds_of_sampled_field(tmp_path):
    g = make_grid(Box((0.0,), (4.0,)), 8)
    data = g.sample(lambda x: 2.0 + 0.1 * x[..., 0])
    path = tmp_path / "p.csv"
    save_grid_function(data, path)
    p = ExponentField.from_spec({"kind": "sampled", "file": "p.csv", "p_minus": 2.0,
                                 "p_plus": 2.5}, base_dir=tmp_path)
    inside = data.values[(g.points[..., 0] >= 1.0) & (g.points[..., 0] <= 3.0)]
    assert essential_bounds(p, Box((1.0,), (3.0,))) == (inside.min(), inside.max())


def test_lh_estimates():
    est = estimate_lh_constants(ExponentField.constant(2.0), Box.cube(1.0, 2))
    assert est.c0_hat == 0 and est.c_inf_hat == 0
    # the defining ratio of this family tends to 1 only at very large radii
    est = estimate_lh_constants(ExponentField.lh_infinity(2.0, 1.0), Box.cube(1.0, 2),
                                scan_radius=1e30)
    assert abs(est.p_inf_hat - 2.0) <= 0.05 * 2.0
    assert abs(est.c_inf_hat - 1.0) <= 0.05
    step = estimate_lh_constants(ExponentField.step(2.0, 3.0), Box.cube(1.0, 1))
    assert math.isinf(step.c0_hat) and not step.locally_lh


@pytest.mark.parametrize("p", lh_fields())
def test_lh_fields_are_locally_lh(p):
    assert estimate_lh_constants(p, Box.cube(2.0, 2)).locally_lh


def test_harmonic_mean_examples():
    Q = Cube((0.0, 0.0), 2.0)
    assert harmonic_mean(ExponentField.constant(2.0), Q) == 2.0
    split = ExponentField.step(2.0, 4.0)
    assert np.isclose(harmonic_mean(split, Q), 8.0 / 3.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-6, 6))
def test_harmonic_mean_between_extremes(cx, cy, k):
    Q = Cube((cx, cy), 2.0**k)
    for p in lh_fields():
        lo, hi = essential_bounds(p, Q)
        assert lo - 1e-12 <= harmonic_mean(p, Q) <= hi + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.floats(-3, 3), st.floats(0.0, 1.0))
def test_harmonic_mean_monotone(cx, k, lift):
    Q = Cube((cx, 0.0), 2.0**k)
    p = ExponentField.lh_infinity(1.5, 0.5)
    q = ExponentField.lh_infinity(1.5 + lift, 0.5)
    assert harmonic_mean(p, Q) <= harmonic_mean(q, Q) + 1e-12


def test_derived_exponents():
    assert np.isclose(derive_exponent(ExponentField.constant(2.0), 1 / 3).params["value"], 6.0)
    assert np.isclose(derive_exponent(ExponentField.constant(2.0), 2 * 0.5 / 4).params["value"], 4.0)
    with pytest.raises(ValueError):
        derive_exponent(ExponentField.constant(3.0), 1 / 3)


def test_interpolation_endpoints_and_midpoint():
    pa, pb = ExponentField.constant(6.0), ExponentField.constant(2.0)
    assert interpolate_exponent(pa, pb, 1.0) is pa
    assert interpolate_exponent(pa, pb, 0.0) is pb
    assert np.isclose(interpolate_exponent(pa, pb, 0.5).params["value"], 3.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(2, 3))
def test_derive_then_interpolate_relation(theta, n):
    p = ExponentField.lh_infinity(1.4, 0.2)
    q = ExponentField.constant(2.0)
    ps = derive_exponent(p, 1.0 / n)
    r = interpolate_exponent(ps, q, theta)
    x = POINTS[:, :n]
    expected = 1.0 / (theta * (1 / p(x) - 1 / n) + (1 - theta) / q(x))
    assert np.allclose(r(x), expected, rtol=1e-12)
