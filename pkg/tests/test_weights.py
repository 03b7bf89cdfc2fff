import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sp_integrate

from varlex.exponents import ExponentField
from varlex.grid import Cube
from varlex.weights import (
    CubeFamily,
    IntegrabilityError,
    SteinWeissParams,
    check_admissible,
    choose_mp_exponents,
    lemma1_bound,
    mp_condition_value,
    power_avg,
    scan_condition,
)

LH = ExponentField.lh_infinity(2.0, 1.0)
PDE_P = ExponentField.radial_affine(-1.0, 3.0, 2.0, 3.0)


def oracle_avg(centre, side, gamma):
    """Brute-force nquad average, raised to 1/gamma."""
    lims = [(c - side / 2, c + side / 2) for c in centre]
    opts = [{"points": [0.0], "limit": 200} if lo < 0 < hi else {"limit": 200} for lo, hi in lims]
    val, _ = sp_integrate.nquad(lambda *x: math.hypot(*x) ** gamma, lims, opts=opts)
    return (val / side ** len(centre)) ** (1 / gamma)


def test_power_avg_examples():
    assert np.isclose(power_avg(Cube((0.5,), 1.0), 1.0), 0.5, rtol=1e-12)
    assert np.isclose(power_avg(Cube((0.5,), 1.0), -0.5), 0.25, rtol=1e-12)
    assert np.isclose(power_avg(Cube((10.5,), 1.0), 2.0), math.sqrt((11**3 - 10**3) / 3),
                      rtol=1e-12)


@settings(max_examples=12, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1), st.floats(-1.9, 2.5))
def test_power_avg_matches_brute_force_2d(cx, cy, k, gamma):
    side = 2.0**k
    if abs(gamma) < 1e-3:
        gamma = 0.5
    assert np.isclose(power_avg(Cube((cx, cy), side), gamma), oracle_avg((cx, cy), side, gamma),
                      rtol=1e-7)


def test_power_avg_geometric_mean_limit():
    Q = Cube((0.5, 0.0), 1.0)
    val, _ = sp_integrate.dblquad(lambda y, x: math.log(math.hypot(x, y)), 0, 1, -0.5, 0.5)
    assert np.isclose(power_avg(Q, 0.0), math.exp(val), rtol=1e-8)
    assert np.isclose(power_avg(Q, 1e-7), power_avg(Q, 0.0), rtol=1e-5)


def test_power_avg_nonintegrable():
    with pytest.raises(IntegrabilityError):
        power_avg(Cube((0.0, 0.0), 1.0), -2.0)
    with pytest.raises(IntegrabilityError):
        power_avg(Cube((0.5,), 1.0), -1.5)
    # away from the origin any power is fine
    assert np.isclose(power_avg(Cube((1.5, 0.0), 1.0), -2.5), oracle_avg((1.5, 0.0), 1.0, -2.5),
                      rtol=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-4, 4), st.floats(-1.5, 3))
def test_power_avg_homogeneous(cx, cy, k, gamma):
    lam = 2.0**k
    Q, scaled = Cube((cx, cy), 1.0), Cube((lam * cx, lam * cy), lam)
    assert np.isclose(power_avg(scaled, gamma), lam * power_avg(Q, gamma), rtol=1e-9)


def test_lemma1_branches():
    assert lemma1_bound(Cube((0.0, 0.0), 2.0)) == ("near", 2.0)
    assert lemma1_bound(Cube((10.5,), 1.0)) == ("far", 10.5)
    assert lemma1_bound(Cube((1.5,), 1.0))[0] == "near"  # dist = side
    assert lemma1_bound(Cube((1.5000001,), 1.0))[0] == "far"


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("frac", [-0.9 * 0.99, 1.0 / 3.0])
def test_power_avg_comparable_to_lemma_bound(n, frac):
    gamma = frac * n
    ratios = {}
    for k, Q in CubeFamily(n, -6, 6).cubes():
        r = power_avg(Q, gamma) / lemma1_bound(Q)[1]
        lo, hi = ratios.get(k, (math.inf, 0.0))
        ratios[k] = (min(lo, r), max(hi, r))
    spans = [hi for _, hi in ratios.values()]
    assert max(spans) <= 2.0 * min(spans)
    assert all(lo > 0 for lo, _ in ratios.values())


def test_choose_mp():
    assert choose_mp_exponents(0.0, 0.0, LH, LH, 3) == (2.0, 2.0)
    q3 = ExponentField.constant(3.0)
    r, s = choose_mp_exponents(-0.75, 0.0, q3, q3, 3)
    assert np.isclose(r, 7 / 6) and s == 2.0


def test_admissible_examples():
    ok = check_admissible(SteinWeissParams.with_chosen_mp(1.0, -0.75, 0.25, PDE_P, PDE_P, 3), 3)
    assert ok.ok, ok.violations
    p, q = ExponentField.constant(2.0), ExponentField.constant(6.0)
    assert check_admissible(SteinWeissParams(1.0, 0.0, 0.0, p, q), 3).ok
    edge = SteinWeissParams(1.0, -1.0, 0.0, PDE_P, PDE_P, 1.01, 2.0)
    checks = [v["check"] for v in check_admissible(edge, 3).violations]
    assert "strip" in checks


def test_condition_value_trivial_case():
    p, q = ExponentField.constant(2.0), ExponentField.constant(6.0)
    params = SteinWeissParams(1.0, 0.0, 0.0, p, q)
    for k, Q in CubeFamily(3, -4, 4).cubes():
        assert np.isclose(mp_condition_value(Q, params, 3), 1.0, rtol=1e-12)


@pytest.mark.parametrize("p,q", [(1.5, 2.0), (2.0, 6.0), (3.0, 3.5)])
def test_condition_value_equals_volume_power(p, q):
    params = SteinWeissParams(1.0, 0.0, 0.0, ExponentField.constant(p), ExponentField.constant(q))
    for k, Q in CubeFamily(2, -5, 5).cubes():
        assert np.isclose(mp_condition_value(Q, params, 2), Q.volume ** (0.5 + 1 / q - 1 / p),
                          rtol=1e-10)


def section5_params():
    return SteinWeissParams.with_chosen_mp(1.0, -0.75, 0.25, LH, LH, 3)


def test_condition_value_modes_agree_near_origin():
    params = section5_params()
    Q = Cube((0.5, 0.0, 0.0), 1.0)
    avg, nrm = mp_condition_value(Q, params, 3), mp_condition_value(Q, params, 3, "norm")
    assert math.isfinite(avg) and 0.5 <= avg / nrm <= 2.0


def test_condition_value_modes_agree_across_family():
    params = section5_params()
    for k, Q in CubeFamily(3, -8, 8).cubes()[::7]:
        ratio = mp_condition_value(Q, params, 3) / mp_condition_value(Q, params, 3, "norm")
        assert 0.25 <= ratio <= 4.0


def test_far_cube_within_family_range():
    # K is the spread of V over the scanned family, which includes far placements
    params = section5_params()
    values = [mp_condition_value(Q, params, 3) for _, Q in CubeFamily(3, -3, 3).cubes()]
    lo, hi = min(values), max(values)
    far = mp_condition_value(Cube((1000.0, 0.0, 0.0), 1.0), params, 3)
    assert lo / 2 <= far <= 2 * hi
    assert mp_condition_value(Cube((1000.0, 0.0, 0.0), 1000.0), params, 3) <= 2 * hi


def test_scan_balanced_is_flat():
    report = scan_condition(CubeFamily(3), section5_params(), 3)
    assert report.verdict == "bounded"
    assert abs(report.slope_small) <= 0.05 and abs(report.slope_large) <= 0.05
    assert report.n_cubes == 21 * (1 + 3 * 5)


def test_scan_weight_below_strip_diverges():
    n, p = 2, ExponentField.constant(2.0)
    params = SteinWeissParams(1.0, -1.1, -0.1, p, p, 1.0 + 1e-9, 2.0)
    report = scan_condition(CubeFamily(n), params, n)
    assert report.verdict == "divergent"
    assert report.to_dict()["sup"] == "inf"


@pytest.mark.parametrize("q", [2.5, 6.0, 12.0])
def test_scan_unbalanced_slope_is_defect(q):
    p = 2.0
    params = SteinWeissParams(1.0, 0.0, 0.0, ExponentField.constant(p), ExponentField.constant(q))
    defect = 1.0 / 3.0 + 1 / q - 1 / p
    report = scan_condition(CubeFamily(3), params, 3)
    assert abs(report.slope_small - defect) <= 0.02
    assert abs(report.slope_large - defect) <= 0.02


def test_scan_sup_monotone_under_refinement():
    params = section5_params()
    small = scan_condition(CubeFamily(3, -4, 4, (0.0, 1.0)), params, 3)
    large = scan_condition(CubeFamily(3, -6, 6, (0.0, 1.0, 4.0, 32.0)), params, 3)
    assert large.sup >= small.sup


def test_family_layout():
    fam = CubeFamily(1, 0, 0, (0.0, 1.0))
    centres = sorted(float(Q.center[0]) for Q in fam.cubes_at(0))
    assert centres == [-1.5, -0.5, 0.0, 0.5, 1.5]
    for Q in fam.cubes_at(0):
        assert Q.dist_to_origin() in (0.0, 1.0)
