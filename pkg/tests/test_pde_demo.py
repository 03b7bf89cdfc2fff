import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varlex.exponents import ExponentField
from varlex.grid import Box, GridFunction, make_grid
from varlex.inequalities import TestFamily, mean_value
from varlex.pde_demo import (
    MatrixField,
    NeumannProblem,
    check_neumann_hypotheses,
    linear_benchmark_problem,
    problem_from_spec,
    section5_problem,
    solve_linear_neumann,
    solve_neumann,
    verify_degenerate_poincare,
    weighted_mean,
)
from varlex.weights import PowerWeight


def violated(prob, a, b):
    return {v["check"] for v in check_neumann_hypotheses(prob, a, b).violations}


# ------------------------------------------------------------ weighted mean


def test_weighted_mean_examples():
    g = make_grid(Box((0.0,), (1.0,)), 2000)
    const = g.sample(lambda x: np.full(x.shape[:-1], 1.7))
    assert np.isclose(weighted_mean(const, PowerWeight(-0.5, 1)), 1.7)
    x = g.sample(lambda x: x[..., 0])
    assert abs(weighted_mean(x, PowerWeight(1.0, 1)) - 2.0 / 3.0) < 1e-6
    box = Box((0.2,), (0.9,))
    assert np.isclose(weighted_mean(x, PowerWeight(0.0, 1), box), mean_value(x, box))


# --------------------------------------------------------------- hypotheses


def test_section5_hypotheses_hold_in_3d():
    prob, a, b = section5_problem(24, n=3)
    assert (a, b) == (-0.75, 0.25)
    assert prob.Q.diag_powers == (-0.75, -0.25, 0.25)
    rep = check_neumann_hypotheses(prob, a, b)
    assert rep.ok, rep.violations
    assert rep.fitted_c >= 1.0


def test_identity_problem_hypotheses():
    g = make_grid(Box.cube(1.0, 2), 16)
    prob = NeumannProblem(g, np.ones(g.shape, bool), MatrixField.identity(2), PowerWeight(0.0, 2),
                          ExponentField.constant(2.5), g.sample(lambda x: x[..., 0]))
    rep = check_neumann_hypotheses(prob, 0.0, 0.0)
    assert rep.ok and np.isclose(rep.fitted_c, 1.0)


@pytest.fixture(scope="module")
def base2d():
    return section5_problem(32)


def test_section5_2d_hypotheses_hold(base2d):
    prob, a, b = base2d
    assert check_neumann_hypotheses(prob, a, b).ok


def test_each_hypothesis_can_fail(base2d):
    prob, a, b = base2d
    p_plus = prob.p.p_plus
    edge = -2 / p_plus
    assert violated(dataclasses.replace(prob, v=PowerWeight(edge, 2)), edge, b) == {"strip"}
    assert violated(dataclasses.replace(prob, v=PowerWeight(0.3, 2)), 0.3, 0.25) == {"strip"}
    assert violated(dataclasses.replace(prob, v=PowerWeight(0.0, 2)), 0.0, 1.0) == {"strip"}
    assert violated(dataclasses.replace(prob, v=PowerWeight(-0.6, 2)), -0.6, 0.5) == {"balance"}
    assert violated(dataclasses.replace(prob, Q=MatrixField.diagonal((1.0, 1.0))), a, b) \
        == {"eigenvalue"}
    assert violated(dataclasses.replace(prob, Q=MatrixField.diagonal((-2.0, 0.5))), a, b) \
        == {"op_norm"}
    assert violated(dataclasses.replace(prob, p=ExponentField.step(2.0, 3.0)), a, b) \
        == {"log_holder"}
    indefinite = MatrixField.from_callable(
        lambda x: np.broadcast_to(np.array([[1.0, 2.0], [2.0, 1.0]]), x.shape[:-1] + (2, 2)), 2)
    assert "psd" in violated(dataclasses.replace(prob, Q=indefinite), a, b)


def test_weight_mismatch_reported(base2d):
    prob, a, b = base2d
    assert "weight" in violated(prob, -0.4, b)


# -------------------------------------------------------------------- solver


def test_linear_benchmark():
    prob = linear_benchmark_problem(256)
    res = solve_neumann(prob)
    x = prob.grid.points[..., 0]
    assert res.converged and res.residual <= 1e-6
    assert np.max(np.abs(res.solution.values + np.cos(np.pi * x) / np.pi**2)) <= 1e-4


def test_linear_benchmark_converges_at_second_order():
    errs = []
    for N in (64, 128, 256):
        prob = linear_benchmark_problem(N)
        x = prob.grid.points[..., 0]
        u = solve_neumann(prob).solution.values
        errs.append(np.max(np.abs(u + np.cos(np.pi * x) / np.pi**2)))
    assert 3.5 <= errs[0] / errs[1] <= 4.5 and 3.5 <= errs[1] / errs[2] <= 4.5


def test_quadratic_case_matches_direct_solve(base2d):
    prob, a, b = base2d
    quad = dataclasses.replace(prob, p=ExponentField.constant(2.0))
    rng = np.random.default_rng(5)
    start = GridFunction(prob.grid, rng.normal(size=prob.grid.shape))
    res = solve_neumann(quad, initial=start)
    direct = solve_linear_neumann(quad)
    assert res.converged
    assert np.max(np.abs(res.solution.values - direct.values)) <= 1e-8
    with pytest.raises(ValueError):
        solve_linear_neumann(prob)


def test_zero_data_gives_zero(base2d):
    prob, _, _ = base2d
    zero = dataclasses.replace(prob, f=GridFunction(prob.grid, np.zeros(prob.grid.shape)))
    res = solve_neumann(zero)
    assert res.converged and np.all(res.solution.values == 0.0)


@settings(max_examples=5, deadline=None)
@given(st.floats(-100, 100))
def test_constant_shift_of_initial_guess(shift):
    prob, _, _ = section5_problem(24)
    rng = np.random.default_rng(0)
    start = GridFunction(prob.grid, rng.normal(size=prob.grid.shape))
    u1 = solve_neumann(prob, initial=start).solution.values
    u2 = solve_neumann(prob, initial=start + shift).solution.values
    assert np.allclose(u1, u2, atol=1e-7)


def test_section5_solution_properties():
    el = []
    for N in (32, 64, 128):
        prob, a, b = section5_problem(N)
        res = solve_neumann(prob)
        assert res.converged
        assert np.all(np.diff(res.energies) <= 0)
        assert abs(res.weighted_mean) <= 1e-12
        u = res.solution
        assert abs(weighted_mean(u, prob.v, prob.mask)) <= 1e-12
        el.append(res.el_residual)
    assert el[0] > el[1] > el[2]


def test_nonconvergence_is_reported():
    prob, _, _ = section5_problem(32)
    res = solve_neumann(prob, tol=1e-30, max_iters=2)
    assert res.status in ("max_iters", "stalled") and not res.converged


# ------------------------------------------------------------------ Poincare


def test_degenerate_poincare_bounded_across_resolutions():
    fam = TestFamily("shifted_bump", count=6, max_width=0.45, shape_range=(0.0, 1.0))
    sups = [verify_degenerate_poincare(*section5_problem(N), fam).sup_ratio for N in (32, 64, 128)]
    assert all(math.isfinite(s) and s > 0 for s in sups)
    assert max(sups) <= 1.1 * min(sups)


class ConstantFamily(TestFamily):
    __test__ = False

    def sample(self, grid, width, shape):
        return GridFunction(grid, np.full(grid.shape, 3.0))


def test_degenerate_poincare_skips_constants():
    prob, a, b = section5_problem(32)
    rep = verify_degenerate_poincare(prob, a, b, ConstantFamily("shifted_bump", count=1))
    assert rep.records[0]["skipped"] and rep.records[0]["ratio"] is None
    assert rep.sup_ratio == 0.0


def test_classical_poincare_case():
    g = make_grid(Box.cube(1.0, 2), 48)
    prob = NeumannProblem(g, np.ones(g.shape, bool), MatrixField.identity(2), PowerWeight(0.0, 2),
                          ExponentField.constant(2.0), g.sample(lambda x: x[..., 0]))
    fam = TestFamily("oscillating_bump", count=6, max_width=0.9, shape_range=(0.0, 1.0))
    rep = verify_degenerate_poincare(prob, 0.0, 0.0, fam)
    # classical Neumann Poincare on [-1, 1]^2: the constant is 1 / sqrt(lambda_1) = 2 / pi
    assert 0 < rep.sup_ratio <= 2 / math.pi * 1.05


# ------------------------------------------------------------------- specs


def test_problem_from_spec_matches_builder():
    spec = {"omega": {"box": {"lower": [-1.0, -1.0], "upper": [1.0, 1.0]}, "mask": "ball"},
            "Q": {"diag_powers": [-0.75, 0.25]}, "v_power": -0.5, "b": 0.25,
            "exponent": {"kind": "radial_affine", "slope": -1.0, "intercept": 3.0,
                         "clamp_min": 2.0, "clamp_max": 3.0},
            "data": {"analytic": "x1"}}
    prob, options = problem_from_spec(spec, 32)
    ref, a, b = section5_problem(32)
    assert np.array_equal(prob.mask, ref.mask)
    assert np.array_equal(prob.f.values, ref.f.values)
    assert options["b"] == b and prob.v.gamma == a
    with pytest.raises(ValueError):
        problem_from_spec({**spec, "data": {"analytic": "nope"}}, 16)
