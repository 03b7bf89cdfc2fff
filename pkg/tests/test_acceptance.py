"""Acceptance criteria, one test each; every test records a PASS/FAIL line."""

import dataclasses
import json
import math
import os
import subprocess
import sys
import time

import numpy as np

from varlex.exponents import ExponentField
from varlex.grid import Box, Cube, make_grid, save_grid_function
from varlex.inequalities import KINDS, InequalityKind, bump, default_kind, verify_theorem
from varlex.norms import char_fn_norm_ratio, check_rescaling, luxemburg_norm, modular
from varlex.operators import (
    FracLapParams,
    check_rp2,
    frac_laplacian_fourier,
    frac_laplacian_integral,
)
from varlex.pde_demo import (
    MatrixField,
    check_neumann_hypotheses,
    linear_benchmark_problem,
    section5_problem,
    solve_neumann,
)
from varlex.weights import (
    CubeFamily,
    PowerWeight,
    SteinWeissParams,
    check_admissible,
    lemma1_bound,
    power_avg,
    scan_condition,
)

C = ExponentField.constant
LH = ExponentField.lh_infinity(2.0, 1.0)
RADIAL = ExponentField.radial_affine(-1.0, 3.0, 2.0, 3.0)
LH_FIELDS = {"constant": C(2.5), "lh_infinity": LH, "radial_affine": RADIAL}


def _ones(grid):
    return grid.sample(lambda x: np.ones(x.shape[:-1]))


def _random_bump(rng, n, points):
    grid = make_grid(Box.cube(1.0, n), points)
    f = grid.sample(lambda x: bump(x, rng.uniform(-0.3, 0.3, n), rng.uniform(0.2, 0.7, n)))
    return f * 10 ** rng.uniform(-3, 3)


def _random_exponent(rng, k):
    if k == 0:
        return ExponentField.lh_infinity(rng.uniform(1.1, 3.0), rng.uniform(0.0, 2.0))
    if k == 1:
        return ExponentField.radial_affine(rng.uniform(-3, 3), rng.uniform(1.5, 4.0), 1.2, 5.0)
    return ExponentField.step(rng.uniform(1.1, 2.0), rng.uniform(2.0, 6.0), rng.uniform(-0.5, 0.5))


def test_constant_exponent_norms(acceptance):
    start = time.perf_counter()
    line = make_grid(Box((0.0,), (1.0,)), 1024)
    cases = [
        (_ones(line), C(3.0), 1.0),
        (line.sample(lambda x: x[..., 0]), C(2.0), 1 / math.sqrt(3)),
        (_ones(line) * 2.0, ExponentField.step(2.0, 4.0, threshold=0.5), 2.0),
    ]
    rng = np.random.default_rng(20)
    for i in range(17):
        n, p = 1 + i % 3, [1.2, 1.5, 2.0, 3.0, 4.5, 7.0][i % 6]
        amp, width = 10 ** rng.uniform(-3, 3), rng.uniform(0.3, 3.0)
        grid = make_grid(Box.cube(6 * width, n), 48)
        f = grid.sample(lambda x: amp * np.exp(-np.sum(x * x, axis=-1) / width**2))
        # the midpoint rule is spectrally accurate for a Gaussian
        cases.append((f, C(p), amp * (width**2 * math.pi / p) ** (n / (2 * p))))
    worst = max(abs(luxemburg_norm(f, p).value / exact - 1) for f, p, exact in cases)
    elapsed = time.perf_counter() - start
    acceptance(1, "constant-exponent consistency", worst <= 1e-6 and elapsed < 10,
               f"{len(cases)} cases, max rel err {worst:.2e}, {elapsed:.2f} s")


def test_modular_at_the_norm(acceptance):
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        f = _random_bump(rng, n, {1: 256, 2: 48, 3: 20}[n])
        p = _random_exponent(rng, seed % 3)
        lam = luxemburg_norm(f, p).value
        worst = max(worst, abs(modular(f * (1 / lam), p) - 1))
    acceptance(2, "modular-norm duality", worst <= 1e-8, f"100 pairs, max |rho - 1| {worst:.2e}")


def test_rescaling_identity(acceptance):
    worst = 0.0
    for trial in range(50):
        rng = np.random.default_rng(1000 + trial)
        n = int(rng.integers(1, 3))
        f = _random_bump(rng, n, {1: 512, 2: 64}[n])
        tau = (1.0, 1.5, 2.0, 3.0)[trial % 4]
        lhs, rhs = check_rescaling(f, _random_exponent(rng, trial % 2), tau)
        worst = max(worst, abs(lhs / rhs - 1))
    acceptance(3, "rescaling identity", worst <= 1e-6, f"50 trials, max rel err {worst:.2e}")


def test_characteristic_function_norms(acceptance):
    worst = {}
    for name, p in LH_FIELDS.items():
        ratios = [char_fn_norm_ratio(Q, p) for n in (1, 2, 3) for _, Q in CubeFamily(n).cubes()]
        worst[name] = max(max(ratios), 1 / min(ratios))
    K = max(worst.values())
    acceptance(4, "characteristic function vs harmonic mean", K <= 4,
               "K = " + ", ".join(f"{k} {v:.4f}" for k, v in worst.items()))


def test_power_average_comparability(acceptance):
    variations, ok = [], True
    for n in (1, 2, 3):
        for gamma in (-0.9 * n * 0.99, -1.0, 1.0, 2.0):
            if gamma <= -n:
                continue  # |x|^-1 is not locally integrable on the line
            upper, lower = {}, {}
            for k, Q in CubeFamily(n).cubes():
                r = power_avg(Q, gamma) / lemma1_bound(Q)[1]
                upper[k] = max(upper.get(k, 0.0), r)
                lower[k] = min(lower.get(k, math.inf), r)
            variation = max(upper.values()) / min(upper.values())
            ok &= variation <= 2.0 and min(lower.values()) > 0
            variations.append(variation)
    acceptance(5, "power average vs distance bound", ok,
               f"{len(variations)} (n, gamma) pairs, max K variation {max(variations):.3f}")


def _balanced(n, alpha, a, b, p):
    q = ExponentField.reciprocal_combination(-(alpha + a - b) / n, [(1.0, p)], "q")
    return SteinWeissParams.with_chosen_mp(alpha, a, b, p, q, n), n


def test_stein_weiss_condition(acceptance):
    start = time.perf_counter()
    balanced = [
        _balanced(3, 1.0, 0.0, 0.0, C(2.0)),
        (SteinWeissParams.with_chosen_mp(1.0, -0.75, 0.25, LH, LH, 3), 3),
        (SteinWeissParams.with_chosen_mp(1.0, -0.75, 0.25, RADIAL, RADIAL, 3), 3),
        _balanced(2, 1.0, -0.25, 0.25, C(1.5)),
        _balanced(1, 0.5, 0.0, 0.0, C(1.5)),
        _balanced(2, 1.0, 0.0, 0.2, C(2.0)),
        _balanced(3, 1.5, -0.2, 0.1, C(1.5)),
        (SteinWeissParams.with_chosen_mp(0.5, -0.25, 0.25, LH, LH, 2), 2),
        (SteinWeissParams.with_chosen_mp(0.5, -0.2, 0.3, LH, LH, 1), 1),
        _balanced(2, 0.5, 0.0, 0.0, LH),
    ]
    violated = [
        # weight below the strip; r -> 1 makes the |x|^a average diverge
        (SteinWeissParams(1.0, -1.1, -0.1, C(2.0), C(2.0), 1.0 + 1e-9, 2.0), 2),
        # b at the upper end of the strip
        (SteinWeissParams(1.0, 0.0, 1.0, C(2.0), C(2.0), 2.0, 2.0), 2),
        # scaling defect of +0.25 and -0.25
        (SteinWeissParams.with_chosen_mp(1.0, 0.0, 0.0, C(2.0), C(2.4), 3), 3),
        (SteinWeissParams.with_chosen_mp(0.5, 0.0, 0.0, C(2.0), C(12.0), 3), 3),
        # balanced at the origin only: q drifts from 6 to 2.2 at infinity
        (SteinWeissParams.with_chosen_mp(1.0, 0.0, 0.0, C(2.0),
                                         ExponentField.lh_infinity(2.2, 3.8), 3), 3),
    ]
    slopes, ok = [], True
    for params, n in balanced:
        ok &= check_admissible(params, n).ok
        rep = scan_condition(CubeFamily(n), params, n)
        slopes += [abs(rep.slope_small), abs(rep.slope_large)]
        ok &= rep.verdict == "bounded" and max(slopes) <= 0.05
    verdicts = [scan_condition(CubeFamily(n), params, n).verdict for params, n in violated]
    ok &= verdicts == ["divergent"] * 5
    elapsed = time.perf_counter() - start
    acceptance(6, "two-weight condition scan", ok and elapsed < 60,
               f"balanced max |slope| {max(slopes):.2e}, violated {verdicts.count('divergent')}/5 "
               f"divergent, {elapsed:.1f} s")


def test_fractional_laplacian_cross_check(acceptance):
    worst = 0.0
    for n, N in ((1, 512), (2, 128)):
        grid = make_grid(Box.cube(4.5, n), N)
        f = grid.sample(lambda x: np.exp(-np.sum(x * x, axis=-1)))
        support = grid.radius < 2.0
        for s in (0.25, 0.5, 0.75):
            a = frac_laplacian_integral(f, FracLapParams(s)).values
            b = frac_laplacian_fourier(f, s).values
            worst = max(worst, np.linalg.norm((a - b)[support]) / np.linalg.norm(b[support]))
    periodic = make_grid(Box((0.0,), (2 * math.pi,)), 128)
    x = periodic.points[..., 0]
    eig = 0.0
    for s in (0.25, 0.5, 0.75):
        for k in (1, 3, 7):
            out = frac_laplacian_fourier(periodic.sample(lambda x: np.sin(k * x[..., 0])), s).values
            eig = max(eig, np.max(np.abs(out - k ** (2 * s) * np.sin(k * x))))
    acceptance(7, "fractional Laplacian forms", worst <= 1e-3 and eig <= 1e-10,
               f"max rel L2 gap {worst:.2e}, eigenfunction error {eig:.1e}")


def test_riesz_inverts_fractional_laplacian(acceptance):
    errs = []
    for N in (64, 128, 256):
        grid = make_grid(Box.cube(4.0, 2), N)
        errs.append(check_rp2(grid.sample(lambda x: bump(x, np.zeros(2), np.ones(2))), 0.5))
    ok = errs[0] > errs[1] > errs[2] and errs[2] <= 5e-2
    acceptance(8, "Riesz potential inverts the fractional Laplacian", ok,
               "rel errors " + ", ".join(f"{e:.3e}" for e in errs))


def test_theorem_verification_suite(acceptance):
    verdicts = {tag: verify_theorem(default_kind(tag)) for tag in KINDS}
    hl = verify_theorem(InequalityKind("HardyLeray", 3, C(2.0)))
    p = C(1.5)
    unbalanced = verify_theorem(InequalityKind("HardySobolev", 2, p, p, a=-1.3, b=0.0),
                                validate=False, refine_steps=1)
    consistent = sum(r.verdict == "consistent" for r in verdicts.values())
    sup = max(hl.sup_ratios)
    ok = consistent == len(KINDS) and 1.0 <= sup <= 2.05 and unbalanced.verdict == "suspect"
    acceptance(9, "inequality verification", ok,
               f"{consistent}/{len(KINDS)} consistent, HardyLeray sup {sup:.4f}, "
               f"unbalanced HardySobolev {unbalanced.verdict}")


def test_pde_demo(acceptance):
    bench = linear_benchmark_problem(256)
    res = solve_neumann(bench)
    x = bench.grid.points[..., 0]
    bench_err = float(np.max(np.abs(res.solution.values + np.cos(np.pi * x) / np.pi**2)))
    ok = res.converged and bench_err <= 1e-4

    el = []
    for N in (32, 64, 128):
        prob, _, _ = section5_problem(N)
        r = solve_neumann(prob)
        ok &= r.converged and bool(np.all(np.diff(r.energies) <= 0))
        el.append(r.el_residual)
    ok &= el[0] > el[1] > el[2]

    prob3, a, b = section5_problem(24, n=3)
    ok &= check_neumann_hypotheses(prob3, a, b).ok
    prob, a, b = section5_problem(32)
    edge = -2 / prob.p.p_plus
    indefinite = MatrixField.from_callable(
        lambda x: np.broadcast_to(np.array([[1.0, 2.0], [2.0, 1.0]]), x.shape[:-1] + (2, 2)), 2)
    single = {
        "strip": (dataclasses.replace(prob, v=PowerWeight(edge, 2)), edge, b),
        "balance": (dataclasses.replace(prob, v=PowerWeight(-0.6, 2)), -0.6, 0.5),
        "weight": (prob, -0.4, b),
        "eigenvalue": (dataclasses.replace(prob, Q=MatrixField.diagonal((1.0, 1.0))), a, b),
        "op_norm": (dataclasses.replace(prob, Q=MatrixField.diagonal((-2.0, 0.5))), a, b),
        "log_holder": (dataclasses.replace(prob, p=ExponentField.step(2.0, 3.0)), a, b),
        "psd": (dataclasses.replace(prob, Q=indefinite), a, b),
    }
    rejected = 0
    for check, (bad, aa, bb) in single.items():
        rejected += check in {v["check"] for v in check_neumann_hypotheses(bad, aa, bb).violations}
    ok &= rejected == len(single)
    acceptance(10, "Neumann problem demo", ok,
               f"benchmark err {bench_err:.2e}, EL residuals "
               + ", ".join(f"{e:.2e}" for e in el) + f", {rejected}/{len(single)} violations caught")


def _cli(args, threads="1"):
    env = {**os.environ, "VARLEX_THREADS": threads}
    return subprocess.run([sys.executable, "-m", "varlex.cli", *args], env=env,
                          capture_output=True, check=False)


def test_cli_reports_are_deterministic(tmp_path, acceptance):
    grid = make_grid(Box((0.0,), (1.0,)), 256)
    save_grid_function(grid.sample(lambda x: np.sin(3 * x[..., 0])), tmp_path / "f.csv")
    configs = {
        "check-condition": {"n": 3, "alpha": 1.0, "a": -0.75, "b": 0.25,
                            "p": {"kind": "lh_infinity", "p_inf": 2.0, "c": 1.0},
                            "q": {"kind": "lh_infinity", "p_inf": 2.0, "c": 1.0}},
        "verify": {"kind": "Poincare", "refine_steps": 1},
        "solve-pde": {"omega": {"box": {"lower": [-1.0, -1.0], "upper": [1.0, 1.0]},
                                "mask": "ball"},
                      "Q": {"diag_powers": [-0.75, 0.25]}, "v_power": -0.5, "b": 0.25,
                      "exponent": {"kind": "radial_affine", "slope": -1.0, "intercept": 3.0,
                                   "clamp_min": 2.0, "clamp_max": 3.0},
                      "data": {"analytic": "x1"}, "resolution": 32},
        "norm": {"function": "f.csv", "exponent": {"kind": "lh_infinity", "p_inf": 1.5, "c": 1.0}},
    }
    identical = 0
    for command, cfg in configs.items():
        path = tmp_path / f"{command}.json"
        path.write_text(json.dumps(cfg))
        outputs = []
        for run, threads in enumerate(("1", "1", "3")):
            # same file names in separate directories: solve-pde reports its dump path
            (tmp_path / str(run)).mkdir(exist_ok=True)
            out = tmp_path / str(run) / f"{command}.out"
            proc = _cli([command, "--config", str(path), "--out", str(out), "--seed", "11"], threads)
            outputs.append(out.read_bytes() if proc.returncode in (0, 2, 3) else None)
        identical += outputs[0] is not None and outputs[0] == outputs[1] == outputs[2]
    acceptance(11, "deterministic CLI reports", identical == len(configs),
               f"{identical}/{len(configs)} commands byte-identical over 3 runs")
