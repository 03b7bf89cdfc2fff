"""A degenerate variable-exponent Neumann problem, solved variationally.

The problem

    div(|sqrt(Q) grad u|^{p(x)-2} Q grad u) = |f|^{p(x)-2} f v^{p(x)}   in Omega,
    n . Q grad u = 0                                                 on the boundary,

with ``v = |x|^a`` is the Euler-Lagrange equation of

    J(u) = int (1/p) |sqrt(Q) grad u|^p dx + int g u dx,   g = |f|^{p-2} f v^p,

restricted to ``<u>_{Omega,v} = 0``.  ``J`` is discretized with piecewise
linear elements on the Kuhn triangulation of the cell-centred nodes that
lie in ``Omega`` (each lattice cell is split into ``n!`` simplices).  The
Neumann condition is natural and needs no special treatment.  Nodal
masses are full cells, so in 1D the scheme is the cell-centred finite
volume method.

Minimization uses descent directions from a regularized Newton system
solved together with the mean-zero constraint, followed by Armijo
backtracking.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve

from .exponents import ExponentField, conjugate_value, estimate_lh_constants
from .grid import Box, Grid, GridFunction, gradient, load_grid_function, make_grid
from .inequalities import TestFamily
from .norms import norm_of_samples
from .weights import PowerWeight, fit_slope

__all__ = [
    "WEIGHT_CAP",
    "MatrixField",
    "NeumannProblem",
    "HypothesisReport",
    "SolveResult",
    "DegeneratePoincareReport",
    "weighted_mean",
    "check_neumann_hypotheses",
    "verify_degenerate_poincare",
    "solve_neumann",
    "solve_linear_neumann",
    "problem_from_spec",
    "section5_problem",
    "linear_benchmark_problem",
]

WEIGHT_CAP = 1e12
PSD_FLOOR = -1e-12
ARMIJO_C = 1e-4


def _capped_power(r: np.ndarray, gamma: float) -> tuple[np.ndarray, int]:
    """``r^gamma`` capped at ``WEIGHT_CAP``; returns the values and the cap-hit count."""
    if gamma == 0:
        return np.ones_like(r, dtype=float), 0
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.asarray(r, dtype=float) ** gamma
    hits = int(np.count_nonzero(~(vals <= WEIGHT_CAP)))
    return np.minimum(vals, WEIGHT_CAP), hits


# ----------------------------------------------------------------- matrix


class MatrixField:
    """Symmetric positive semi-definite matrix function ``Q(x)``.

    Build with :meth:`diagonal` (``Q_ii = |x|^{gamma_i}``), :meth:`identity`,
    :meth:`sampled` (entries given as scalar grid functions) or
    :meth:`from_callable`.
    """

    def __init__(self, n: int, func: Callable[[np.ndarray], np.ndarray], description: dict,
                 diag_powers: tuple[float, ...] | None = None):
        self.n = n
        self._func = func
        self.description = description
        self.diag_powers = diag_powers

    @classmethod
    def diagonal(cls, powers) -> "MatrixField":
        powers = tuple(float(g) for g in powers)
        n = len(powers)

        def func(x):
            r = np.linalg.norm(x, axis=-1)
            out = np.zeros(x.shape[:-1] + (n, n))
            for i, g in enumerate(powers):
                out[..., i, i] = _capped_power(r, g)[0]
            return out

        return cls(n, func, {"diag_powers": list(powers)}, powers)

    @classmethod
    def identity(cls, n: int) -> "MatrixField":
        return cls.diagonal((0.0,) * n)

    @classmethod
    def sampled(cls, entries: list[list[GridFunction]], source: str = "sampled") -> "MatrixField":
        n = len(entries)
        if any(len(row) != n for row in entries):
            raise ValueError("matrix entries must form a square array")
        grid = entries[0][0].grid
        axes = [grid.axis_points(i) for i in range(grid.n)]
        interps = [[RegularGridInterpolator(axes, e.values, bounds_error=False, fill_value=None)
                    for e in row] for row in entries]
        lower, upper = np.array(grid.box.lower), np.array(grid.box.upper)

        def func(x):
            y = np.clip(x, lower, upper)
            out = np.zeros(x.shape[:-1] + (n, n))
            for i in range(n):
                for j in range(n):
                    out[..., i, j] = interps[i][j](y.reshape(-1, n)).reshape(x.shape[:-1])
            return 0.5 * (out + np.swapaxes(out, -1, -2))

        return cls(n, func, {"kind": "sampled", "source": source})

    @classmethod
    def from_callable(cls, func: Callable[[np.ndarray], np.ndarray], n: int,
                      name: str = "custom") -> "MatrixField":
        return cls(n, lambda x: np.asarray(func(x), dtype=float), {"kind": "callable", "name": name})

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self._func(np.asarray(x, dtype=float))

    def sqrt_spectrum(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Smallest and largest eigenvalues of ``sqrt(Q(x))``."""
        if self.diag_powers is not None:
            r = np.linalg.norm(x, axis=-1)
            vals = np.stack([_capped_power(r, 0.5 * g)[0] for g in self.diag_powers], axis=-1)
            return vals.min(axis=-1), vals.max(axis=-1)
        eig = np.linalg.eigvalsh(self(x))
        eig = np.sqrt(np.maximum(eig, 0.0))
        return eig[..., 0], eig[..., -1]

    def min_eigenvalue(self, x: np.ndarray) -> np.ndarray:
        if self.diag_powers is not None:
            return self.sqrt_spectrum(x)[0] ** 2
        return np.linalg.eigvalsh(self(x))[..., 0]

    def to_dict(self) -> dict:
        return dict(self.description)


# ---------------------------------------------------------------- problem


@dataclass
class NeumannProblem:
    """Discretized Neumann problem on the masked grid.

    ``mask`` selects the nodes in ``Omega`` (a ball or the whole box).
    """

    grid: Grid
    mask: np.ndarray
    Q: MatrixField
    v: PowerWeight
    p: ExponentField
    f: GridFunction
    omega_kind: str = "box"

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.grid.shape:
            raise ValueError("mask shape does not match the grid")
        if self.f.grid != self.grid:
            raise ValueError("data lives on a different grid")
        if self.Q.n != self.grid.n or self.v.n != self.grid.n:
            raise ValueError("dimension mismatch between grid, Q and v")
        if int(self.mask.sum()) < 2:
            raise ValueError("domain mask contains fewer than two nodes")

    @property
    def n(self) -> int:
        return self.grid.n

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "omega_kind": self.omega_kind,
                "Q": self.Q.to_dict(), "v_power": self.v.gamma, "exponent": self.p.to_dict()}


def _ball_mask(grid: Grid) -> np.ndarray:
    box = grid.box
    centre = 0.5 * (np.array(box.lower) + np.array(box.upper))
    radius = 0.5 * float(box.widths.min())
    return np.linalg.norm(grid.points - centre, axis=-1) <= radius


def make_mask(grid: Grid, kind: str) -> np.ndarray:
    if kind == "ball":
        return _ball_mask(grid)
    if kind == "box":
        return np.ones(grid.shape, dtype=bool)
    raise ValueError(f"unknown mask kind {kind!r}")


def weighted_mean(f: GridFunction, v: PowerWeight, omega: Box | np.ndarray | None = None) -> float:
    """``(1/v(Omega)) int_Omega f v dx`` by the midpoint rule.

    ``omega`` is a box, a boolean mask on ``f.grid``, or ``None`` (whole grid).
    """
    grid = f.grid
    if omega is None:
        mask = np.ones(grid.shape, dtype=bool)
    elif isinstance(omega, Box):
        mask = omega.contains(grid.points)
    else:
        mask = np.asarray(omega, dtype=bool)
    w = _capped_power(grid.radius, v.gamma)[0][mask]
    total = float(np.sum(w))
    if not total > 0:
        raise ValueError("v(Omega) must be positive")
    return float(np.sum(f.values[mask] * w) / total)


# ------------------------------------------------------------- hypotheses


@dataclass
class HypothesisReport:
    violations: list[dict] = field(default_factory=list)
    fitted_c: float = math.nan
    eigen_slope: float = math.nan
    op_norm_slope: float = math.nan
    op_norm_luxemburg: float = math.nan

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, check: str, detail: str) -> None:
        self.violations.append({"check": check, "detail": detail})

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": self.violations, "fitted_c": self.fitted_c,
                "eigen_slope": self.eigen_slope, "op_norm_slope": self.op_norm_slope,
                "op_norm_luxemburg": self.op_norm_luxemburg}


def _radial_probe(n: int, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Points on a few rays at log-spaced radii in ``(1e-8 radius, radius]``."""
    radii = radius * np.logspace(-8, 0, 81)
    dirs = [np.eye(n)[i] for i in range(n)] + [np.ones(n) / math.sqrt(n)]
    if n > 1:
        dirs.append(np.r_[1.0, -np.ones(n - 1)] / math.sqrt(n))
    pts = np.concatenate([radii[:, None] * d for d in dirs])
    return pts, np.tile(radii, len(dirs))


def check_neumann_hypotheses(prob: NeumannProblem, a: float, b: float,
                             slope_tol: float = 1e-6, seed: int = 0) -> HypothesisReport:
    """Check the existence hypotheses for the weighted Neumann problem.

    Verified: ``-n/p+ < a <= b < n/(p-)'``, ``1/n + (a-b)/n >= 0``, ``v = |x|^a``
    with ``a`` equal to the problem's weight power, ``Q`` symmetric PSD,
    ``c |x|^b |xi| <= |sqrt(Q(x)) xi|`` (reported ``fitted_c``; also the
    small-radius log-log slope of ``lambda_min(sqrt Q)/|x|^b`` must be
    non-positive so ``c`` does not degenerate at the origin),
    ``|sqrt Q|_op`` in ``L^p`` (its small-radius power ``sigma`` must give
    ``sigma p+ > -n``), and local log-Hoelder continuity of ``p``.
    Never raises for violated hypotheses.
    """
    rep = HypothesisReport()
    n, p = prob.n, prob.p
    if not -n / p.p_plus < a:
        rep.add("strip", f"a={a} is not > -n/p+ = {-n / p.p_plus}")
    if not a <= b:
        rep.add("strip", f"a={a} exceeds b={b}")
    if not b < n / conjugate_value(p.p_minus):
        rep.add("strip", f"b={b} is not < n/(p-)' = {n / conjugate_value(p.p_minus)}")
    if not 1 / n + (a - b) / n >= 0:
        rep.add("balance", f"1/n + (a-b)/n = {1 / n + (a - b) / n} is negative")
    if prob.v.gamma != a:
        rep.add("weight", f"problem weight power {prob.v.gamma} differs from a={a}")

    pts = prob.grid.points[prob.mask]
    radius = float(np.max(np.linalg.norm(pts, axis=-1)))
    probe, radii = _radial_probe(n, radius)
    sample = np.concatenate([pts, probe])
    if float(np.min(prob.Q.min_eigenvalue(sample))) < PSD_FLOOR:
        rep.add("psd", "Q has a negative eigenvalue at some sample point")
    lam_min, lam_max = prob.Q.sqrt_spectrum(sample)
    r_all = np.linalg.norm(sample, axis=-1)
    ratio = lam_min / r_all**b
    rep.fitted_c = float(ratio.min())
    lo_min, lo_max = prob.Q.sqrt_spectrum(probe)
    small = radii <= radius * 1e-4
    with np.errstate(divide="ignore"):
        log_ratio = np.log(lo_min / radii**b)
    rep.eigen_slope = _worst_ray_slope(np.log(radii), log_ratio, small, worst="max")
    if not rep.fitted_c > 0:
        rep.add("eigenvalue", f"fitted c = {rep.fitted_c} is not positive")
    elif rep.eigen_slope > slope_tol:
        rep.add("eigenvalue", f"lambda_min(sqrt Q)/|x|^b decays at the origin "
                              f"(log-log slope {rep.eigen_slope:.3g})")
    with np.errstate(divide="ignore"):
        log_op = np.log(lo_max)
    rep.op_norm_slope = _worst_ray_slope(np.log(radii), log_op, small, worst="min")
    if not rep.op_norm_slope * p.p_plus > -n:
        rep.add("op_norm", f"|sqrt Q|_op ~ |x|^{rep.op_norm_slope:.3g} is not in L^p "
                           f"(needs slope * p+ > -n)")
    op_on_grid = prob.Q.sqrt_spectrum(pts)[1]
    pv = p(pts)
    rep.op_norm_luxemburg = norm_of_samples(op_on_grid, pv, prob.grid.cell_volume).value
    dom = Box(tuple(pts.min(axis=0) - 1e-12), tuple(pts.max(axis=0) + 1e-12))
    if not estimate_lh_constants(p, dom, seed=seed).locally_lh:
        rep.add("log_holder", "p fails the local log-Hoelder condition")
    return rep


def _worst_ray_slope(log_r: np.ndarray, log_y: np.ndarray, select: np.ndarray, worst: str) -> float:
    """Slope per ray (rays are consecutive blocks of equal length), most adverse one."""
    count = int(np.sum(log_r == log_r[0]))
    block = len(log_r) // count
    slopes = []
    for k in range(count):
        sl = slice(k * block, (k + 1) * block)
        sel = select[sl]
        slopes.append(fit_slope(log_r[sl][sel], log_y[sl][sel]))
    slopes = [s if math.isfinite(s) else (math.inf if worst == "max" else -math.inf)
              for s in slopes]
    return max(slopes) if worst == "max" else min(slopes)


# ------------------------------------------------------------ discretization


@dataclass
class _Mesh:
    node_index: np.ndarray      # grid-shaped, -1 outside the mask
    coords: np.ndarray          # (N, n)
    mass: np.ndarray            # (N,)
    D: sparse.csr_matrix        # (T*n, N): simplex gradients, row = t*n + axis
    volume: float               # common simplex volume
    bary: np.ndarray            # (T, n)

    @property
    def n_simplices(self) -> int:
        return len(self.bary)


def _build_mesh(grid: Grid, mask: np.ndarray) -> _Mesh:
    n = grid.n
    h = grid.spacing
    idx = -np.ones(grid.shape, dtype=np.int64)
    idx[mask] = np.arange(int(mask.sum()))
    coords = grid.points[mask]
    corner = tuple(slice(0, N - 1) for N in grid.shape)
    base = np.stack(np.meshgrid(*(np.arange(N - 1) for N in grid.shape), indexing="ij"),
                    axis=-1)[corner].reshape(-1, n) if n > 1 else np.arange(grid.shape[0] - 1)[:, None]
    rows, cols, vals, bary = [], [], [], []
    t0 = 0
    for perm in itertools.permutations(range(n)):
        verts = [base]
        for axis in perm:
            step = verts[-1].copy()
            step[:, axis] += 1
            verts.append(step)
        ids = np.stack([idx[tuple(v.T)] for v in verts], axis=1)
        keep = np.all(ids >= 0, axis=1)
        ids = ids[keep]
        T = len(ids)
        if T == 0:
            continue
        tri = t0 + np.arange(T)
        for k, axis in enumerate(perm):
            r = tri * n + axis
            rows += [r, r]
            cols += [ids[:, k + 1], ids[:, k]]
            vals += [np.full(T, 1.0 / h[axis]), np.full(T, -1.0 / h[axis])]
        bary.append(coords[ids].mean(axis=1))
        t0 += T
    if t0 == 0:
        raise ValueError("the domain mask contains no complete simplex")
    D = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(t0 * n, len(coords)))
    vol = grid.cell_volume / math.factorial(n)
    mass = np.full(len(coords), grid.cell_volume)
    return _Mesh(idx, coords, mass, D, vol, np.concatenate(bary))


@dataclass
class _Discrete:
    mesh: _Mesh
    p_T: np.ndarray          # exponent at simplex barycentres
    Q_T: np.ndarray          # (T, n, n)
    load: np.ndarray         # projected g at nodes
    constraint: np.ndarray   # mass * v
    cap_hits: int


def _discretize(prob: NeumannProblem) -> _Discrete:
    mesh = _build_mesh(prob.grid, prob.mask)
    cap_hits = 0
    p_T = prob.p(mesh.bary)
    Q_T = prob.Q(mesh.bary)
    if prob.Q.diag_powers is not None:
        r_T = np.linalg.norm(mesh.bary, axis=-1)
        cap_hits += sum(_capped_power(r_T, g)[1] for g in prob.Q.diag_powers)
    r_nodes = np.linalg.norm(mesh.coords, axis=-1)
    v_nodes, hits = _capped_power(r_nodes, prob.v.gamma)
    cap_hits += hits
    p_nodes = prob.p(mesh.coords)
    fvals = prob.f.values[prob.mask]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = np.where(fvals != 0, np.abs(fvals) ** (p_nodes - 2) * fvals, 0.0)
        vp = v_nodes**p_nodes
    cap_hits += int(np.count_nonzero(~(vp <= WEIGHT_CAP)))
    g = g * np.minimum(vp, WEIGHT_CAP)
    # compatibility: the load must integrate to zero against constants
    g = g - float(np.sum(mesh.mass * g) / np.sum(mesh.mass))
    return _Discrete(mesh, p_T, Q_T, g, mesh.mass * v_nodes, cap_hits)


def _flux(disc: _Discrete, u: np.ndarray):
    """Per-simplex gradient, ``s = grad^T Q grad``, and ``Q grad``."""
    n = disc.Q_T.shape[-1]
    grad = (disc.mesh.D @ u).reshape(-1, n)
    Qg = np.einsum("tij,tj->ti", disc.Q_T, grad)
    s = np.einsum("ti,ti->t", grad, Qg)
    return grad, Qg, np.maximum(s, 0.0)


def _energy(disc: _Discrete, u: np.ndarray) -> float:
    _, _, s = _flux(disc, u)
    p = disc.p_T
    bulk = disc.mesh.volume * float(np.sum(s ** (0.5 * p) / p))
    return bulk + float(np.sum(disc.mesh.mass * disc.load * u))


def _gradient(disc: _Discrete, u: np.ndarray) -> np.ndarray:
    _, Qg, s = _flux(disc, u)
    p = disc.p_T
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(s > 0, s ** (0.5 * p - 1), 0.0)
    flux = disc.mesh.volume * coef[:, None] * Qg
    return disc.mesh.D.T @ flux.ravel() + disc.mesh.mass * disc.load


def _hessian(disc: _Discrete, u: np.ndarray, eps2: float) -> sparse.csr_matrix:
    n = disc.Q_T.shape[-1]
    _, Qg, s = _flux(disc, u)
    p = disc.p_T
    sr = s + eps2
    coef = sr ** (0.5 * p - 1)
    blocks = coef[:, None, None] * (disc.Q_T + ((p - 2) / sr)[:, None, None]
                                    * np.einsum("ti,tj->tij", Qg, Qg))
    blocks *= disc.mesh.volume
    return (disc.mesh.D.T @ _block_diag(blocks) @ disc.mesh.D).tocsr()


def _block_diag(blocks: np.ndarray) -> sparse.csr_matrix:
    T, n, _ = blocks.shape
    base = (np.arange(T) * n)[:, None, None]
    rows = np.broadcast_to(base + np.arange(n)[None, :, None], blocks.shape)
    cols = np.broadcast_to(base + np.arange(n)[None, None, :], blocks.shape)
    return sparse.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(T * n, T * n))


def _kkt_solve(H: sparse.csr_matrix, c: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``[H c; c^T 0][d; lam] = [rhs; 0]`` and return ``d``."""
    N = H.shape[0]
    K = sparse.bmat([[H, sparse.csr_matrix(c[:, None])],
                     [sparse.csr_matrix(c[None, :]), None]], format="csc")
    sol = spsolve(K, np.concatenate([rhs, [0.0]]))
    return np.asarray(sol[:N])


def _project(vec: np.ndarray, c: np.ndarray) -> np.ndarray:
    return vec - (float(vec @ c) / float(c @ c)) * c


# ------------------------------------------------------------------- solve


@dataclass
class SolveResult:
    solution: GridFunction
    status: str                 # "converged" | "max_iters" | "stalled"
    iterations: int
    energies: list[float]
    residual: float
    el_residual: float
    cap_hits: int
    n_nodes: int
    weighted_mean: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return {"status": self.status, "iterations": self.iterations,
                "energies": self.energies, "residual": self.residual,
                "el_residual": self.el_residual, "cap_hits": self.cap_hits,
                "n_nodes": self.n_nodes, "weighted_mean": self.weighted_mean}


def _residual(disc: _Discrete, grad: np.ndarray) -> float:
    """Sup-norm of the constraint-projected gradient per unit volume."""
    return float(np.max(np.abs(_project(grad, disc.constraint)) / disc.mesh.mass))


def _to_grid(prob: NeumannProblem, disc: _Discrete, u: np.ndarray) -> GridFunction:
    values = np.zeros(prob.grid.shape)
    values[prob.mask] = u
    return GridFunction(prob.grid, values)


def _test_modes(box: Box, n: int, kmax: int = 2):
    lower, widths = np.array(box.lower), box.widths
    for k in itertools.product(range(kmax + 1), repeat=n):
        if not any(k):
            continue
        k = np.array(k, dtype=float)
        w = np.pi * k / widths

        def phi(x, w=w):
            return np.prod(np.cos(w * (x - lower)), axis=-1)

        def dphi(x, w=w):
            c = np.cos(w * (x - lower))
            s = -w * np.sin(w * (x - lower))
            out = np.empty(x.shape)
            for i in range(n):
                others = np.prod(np.delete(c, i, axis=-1), axis=-1) if n > 1 else 1.0
                out[..., i] = s[..., i] * others
            return out

        yield phi, dphi


def el_residual(prob: NeumannProblem, disc: _Discrete, u: np.ndarray) -> float:
    """Weak Euler-Lagrange residual against smooth cosine modes, relative to its terms.

    ``R(phi) = int |sqrt Q grad u|^{p-2} Q grad u . grad phi + int g phi``; the
    modes are not in the discrete space, so ``R`` measures discretization error.
    """
    _, Qg, s = _flux(disc, u)
    p = disc.p_T
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(s > 0, s ** (0.5 * p - 1), 0.0)
    flux = coef[:, None] * Qg
    vol, mass = disc.mesh.volume, disc.mesh.mass
    worst, scale = 0.0, 0.0
    for phi, dphi in _test_modes(prob.grid.box, prob.n):
        dp = dphi(disc.mesh.bary)
        ph = phi(disc.mesh.coords)
        bulk = vol * np.einsum("ti,ti->t", flux, dp)
        load = mass * disc.load * ph
        worst = max(worst, abs(float(bulk.sum() + load.sum())))
        scale = max(scale, float(np.abs(bulk).sum() + np.abs(load).sum()))
    return worst / scale if scale > 0 else 0.0


def solve_neumann(prob: NeumannProblem, tol: float = 1e-8, max_iters: int = 200,
                  initial: GridFunction | None = None) -> SolveResult:
    """Minimize the discrete energy under ``<u>_{Omega,v} = 0``.

    Each iteration solves a regularized Newton system together with the
    constraint (so directions keep the weighted mean at zero), then
    backtracks from step 1 by halving until the Armijo condition with
    ``c = 1e-4`` holds.  Stops when the projected gradient per unit volume
    is at most ``tol``.  An accepted step that raises the energy indicates
    an inconsistent gradient and raises ``RuntimeError``.
    """
    disc = _discretize(prob)
    c = disc.constraint
    if initial is None:
        u = np.zeros(len(disc.mesh.coords))
    else:
        u = np.array(initial.values[prob.mask], dtype=float)
    u = u - float(u @ c) / float(c.sum())
    energy = _energy(disc, u)
    energies = [energy]
    status, it = "max_iters", 0
    grad = _gradient(disc, u)
    res = _residual(disc, grad)
    for it in range(1, max_iters + 1):
        if res <= tol:
            status, it = "converged", it - 1
            break
        _, _, s = _flux(disc, u)
        mean_s = float(np.mean(s))
        eps2 = 1e-10 * mean_s if mean_s > 0 else 1.0
        H = _hessian(disc, u, eps2)
        d = _kkt_solve(H, c, -grad)
        slope = float(grad @ d)
        if not slope < 0:
            d = -_project(grad, c) / disc.mesh.mass
            slope = float(grad @ d)
        step, accepted = 1.0, False
        for _ in range(60):
            trial = u + step * d
            e_trial = _energy(disc, trial)
            if e_trial <= energy + ARMIJO_C * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = "stalled"
            break
        if e_trial > energy:
            raise RuntimeError("energy increased after an accepted step")
        u, energy = trial, e_trial
        energies.append(energy)
        grad = _gradient(disc, u)
        res = _residual(disc, grad)
    else:
        if res <= tol:
            status = "converged"
    return SolveResult(
        solution=_to_grid(prob, disc, u), status=status, iterations=it, energies=energies,
        residual=res, el_residual=el_residual(prob, disc, u), cap_hits=disc.cap_hits,
        n_nodes=len(u), weighted_mean=float(u @ c) / float(c.sum()),
    )


def solve_linear_neumann(prob: NeumannProblem) -> GridFunction:
    """Direct solve of the ``p = 2`` discrete Neumann system with the mean constraint."""
    disc = _discretize(prob)
    if not np.allclose(disc.p_T, 2.0):
        raise ValueError("the direct solve needs p = 2")
    blocks = disc.mesh.volume * disc.Q_T
    K = (disc.mesh.D.T @ _block_diag(blocks) @ disc.mesh.D).tocsr()
    u = _kkt_solve(K, disc.constraint, -disc.mesh.mass * disc.load)
    return _to_grid(prob, disc, u)


# --------------------------------------------------------- Poincare check


@dataclass
class DegeneratePoincareReport:
    records: list[dict]
    sup_ratio: float
    argmax: str | None
    resolution: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"records": self.records, "sup_ratio": self.sup_ratio,
                "argmax": self.argmax, "resolution": list(self.resolution)}


def verify_degenerate_poincare(prob: NeumannProblem, a: float, b: float,
                               family: TestFamily) -> DegeneratePoincareReport:
    """Sup over ``family`` of ``||v (f - <f>_{Omega,v})||_p / ||sqrt(Q) grad f||_p`` on ``Omega``.

    Members with a right-hand side below 1e-14 (for instance constants) are
    skipped.  ``a`` must match the problem's weight power; ``b`` enters
    only through the hypotheses and is recorded for reference.
    """
    if prob.v.gamma != a:
        raise ValueError("a must equal the problem's weight power")
    grid, mask = prob.grid, prob.mask
    pts = grid.points[mask]
    pv = prob.p(pts)
    v_nodes = _capped_power(np.linalg.norm(pts, axis=-1), a)[0]
    Qn = prob.Q(pts)
    records, best, best_id = [], 0.0, None
    for w, sh in family.members(grid):
        f = family.sample(grid, w, sh)
        rid = family.describe(w, sh)
        centred = f.values[mask] - weighted_mean(f, prob.v, mask)
        lhs = norm_of_samples(np.abs(v_nodes * centred), pv, grid.cell_volume).value
        g = gradient(f).values
        gvec = np.stack([gi[mask] for gi in g], axis=-1)
        qg = np.einsum("tij,tj->ti", Qn, gvec)
        mag = np.sqrt(np.maximum(np.einsum("ti,ti->t", gvec, qg), 0.0))
        rhs = norm_of_samples(mag, pv, grid.cell_volume).value
        if not rhs >= 1e-14:
            records.append({"id": rid, "lhs": lhs, "rhs": rhs, "ratio": None,
                            "skipped": "rhs below 1e-14"})
            continue
        ratio = lhs / rhs
        records.append({"id": rid, "lhs": lhs, "rhs": rhs, "ratio": ratio})
        if ratio > best:
            best, best_id = ratio, rid
    return DegeneratePoincareReport(records, best, best_id, grid.shape)


# ------------------------------------------------------------ construction


_ANALYTIC_DATA = {
    "cos_pi_x": lambda x: np.cos(np.pi * x[..., 0]),
    "x1": lambda x: x[..., 0],
    "zero": lambda x: np.zeros(x.shape[:-1]),
}


def problem_from_spec(spec: dict, resolution: int | tuple[int, ...] | None = None,
                      base_dir: str | Path | None = None) -> tuple[NeumannProblem, dict]:
    """Build a problem from its JSON description.

    Returns the problem and the remaining solver options
    (``b``, ``tol``, ``max_iters``).
    """
    base = Path(base_dir) if base_dir is not None else Path(".")
    omega = spec["omega"]
    box = Box(tuple(omega["box"]["lower"]), tuple(omega["box"]["upper"]))
    counts = resolution if resolution is not None else spec.get("resolution", 64)
    grid = make_grid(box, counts)
    mask = make_mask(grid, omega.get("mask", "box"))
    qspec = spec.get("Q", {"diag_powers": [0.0] * box.n})
    if "diag_powers" in qspec:
        Q = MatrixField.diagonal(qspec["diag_powers"])
    elif "file" in qspec:
        entries = [[_resample(load_grid_function(_resolve(base, path)), grid) for path in row]
                   for row in qspec["file"]]
        Q = MatrixField.sampled(entries, source=json.dumps(qspec["file"]))
    else:
        raise ValueError("Q needs diag_powers or file")
    v = PowerWeight(float(spec.get("v_power", 0.0)), box.n)
    p = ExponentField.from_spec(spec["exponent"], base_dir=base)
    data = spec.get("data", {"analytic": "zero"})
    if "analytic" in data:
        name = data["analytic"]
        if name not in _ANALYTIC_DATA:
            raise ValueError(f"unknown analytic data {name!r}; choose from {sorted(_ANALYTIC_DATA)}")
        f = grid.sample(_ANALYTIC_DATA[name])
    elif "file" in data:
        f = _resample(load_grid_function(_resolve(base, data["file"])), grid)
    else:
        raise ValueError("data needs 'analytic' or 'file'")
    prob = NeumannProblem(grid, mask, Q, v, p, f, omega.get("mask", "box"))
    options = {"b": float(spec.get("b", v.gamma)), "tol": float(spec.get("tol", 1e-8)),
               "max_iters": int(spec.get("max_iters", 200))}
    return prob, options


def _resolve(base: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def _resample(f: GridFunction, grid: Grid) -> GridFunction:
    if f.grid == grid:
        return f
    if not f.is_scalar:
        raise ValueError("expected scalar data")
    axes = [f.grid.axis_points(i) for i in range(f.grid.n)]
    interp = RegularGridInterpolator(axes, f.values, bounds_error=False, fill_value=None)
    return GridFunction(grid, interp(grid.points.reshape(-1, grid.n)).reshape(grid.shape))


def section5_problem(resolution: int = 64, n: int = 2) -> tuple[NeumannProblem, float, float]:
    """The weighted example on the unit ball: returns ``(problem, a, b)``.

    ``n = 3``: ``a = -3/4``, ``b = 1/4``, ``Q = diag(|x|^{-3/4}, |x|^{-1/4}, |x|^{1/4})``.
    ``n = 2`` (the desk-scale analogue): ``a = -1/2``, ``b = 1/4``,
    ``Q = diag(|x|^{-3/4}, |x|^{1/4})``.  Both use ``p(x) = clamp(3 - |x|, 2, 3)``
    and data ``f = x_1``.
    """
    if n == 3:
        a, b, powers = -0.75, 0.25, (-0.75, -0.25, 0.25)
    elif n == 2:
        a, b, powers = -0.5, 0.25, (-0.75, 0.25)
    else:
        raise ValueError("the example is defined for n = 2 and n = 3")
    grid = make_grid(Box.cube(1.0, n), resolution)
    p = ExponentField.radial_affine(-1.0, 3.0, 2.0, 3.0)
    prob = NeumannProblem(grid, _ball_mask(grid), MatrixField.diagonal(powers),
                          PowerWeight(a, n), p, grid.sample(_ANALYTIC_DATA["x1"]), "ball")
    return prob, a, b


def linear_benchmark_problem(resolution: int = 256) -> NeumannProblem:
    """``u'' = cos(pi x)`` on ``(0, 1)`` with ``u'(0) = u'(1) = 0``; solution ``-cos(pi x)/pi^2``."""
    grid = make_grid(Box((0.0,), (1.0,)), resolution)
    return NeumannProblem(grid, np.ones(grid.shape, dtype=bool), MatrixField.identity(1),
                          PowerWeight(0.0, 1), ExponentField.constant(2.0),
                          grid.sample(_ANALYTIC_DATA["cos_pi_x"]), "box")
