"""Exponent functions ``p(.)`` with ``1 < p_- <= p(x) <= p_+ < inf``.

Four primitive kinds are provided (constant, the log-Hoelder family
``p_inf + c / log(e + |x|)``, clamped radial affine, and sampled grid data)
plus a step along one coordinate axis and arbitrary callables.  Exponent
arithmetic (conjugates, Sobolev-type shifts, interpolation, rescaling) yields
*derived* fields of the form ``1/r(x) = offset + sum_i w_i / p_i(x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.stats import qmc

from .grid import Box, Cube, GridFunction, load_grid_function, make_grid, radius_range

__all__ = [
    "ExponentField",
    "ExponentRangeError",
    "LogHolderEstimate",
    "eval_exponent",
    "conjugate_exponent",
    "essential_bounds",
    "estimate_lh_constants",
    "harmonic_mean",
    "derive_exponent",
    "interpolate_exponent",
    "scale_exponent",
    "holder_exponent",
    "conjugate_value",
]

_RANGE_TOL = 1e-12


class ExponentRangeError(ValueError):
    """An exponent evaluated outside its declared ``[p_minus, p_plus]``."""


def conjugate_value(p: float) -> float:
    """Hoelder conjugate ``p / (p - 1)`` of a scalar exponent."""
    if p <= 1:
        raise ValueError(f"conjugate of p={p} is unbounded")
    return p / (p - 1.0)


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    return x


class ExponentField:
    """An exponent function on R^n (or on the box of its sample grid).

    Use the classmethod constructors rather than ``__init__``.  Calling the
    field on an array of points (last axis = coordinates) returns ``p(x)`` and
    raises :class:`ExponentRangeError` if any value leaves the declared bounds.
    """

    def __init__(self, kind: str, params: dict, p_minus: float, p_plus: float,
                 func: Callable[[np.ndarray], np.ndarray], parents: tuple = ()):
        p_minus, p_plus = float(p_minus), float(p_plus)
        if not (1.0 < p_minus <= p_plus < math.inf):
            raise ValueError(f"need 1 < p_minus <= p_plus < inf, got [{p_minus}, {p_plus}]")
        self.kind = kind
        self.params = params
        self.p_minus = p_minus
        self.p_plus = p_plus
        self._func = func
        self.parents = parents

    # -- constructors ---------------------------------------------------------

    @classmethod
    def constant(cls, value: float) -> "ExponentField":
        value = float(value)
        return cls("constant", {"value": value}, value, value,
                   lambda x: np.full(x.shape[:-1], value))

    @classmethod
    def lh_infinity(cls, p_inf: float, c: float, p_minus: float | None = None,
                    p_plus: float | None = None) -> "ExponentField":
        """``p(x) = p_inf + c / log(e + |x|)``, decreasing from ``p_inf + c`` to ``p_inf``."""
        p_inf, c = float(p_inf), float(c)
        if c < 0:
            raise ValueError("lh_infinity family needs c >= 0")
        p_minus = p_inf if p_minus is None else float(p_minus)
        p_plus = p_inf + c if p_plus is None else float(p_plus)
        if p_inf + c > p_plus * (1 + _RANGE_TOL) or p_inf < p_minus * (1 - _RANGE_TOL):
            raise ValueError(f"declared bounds [{p_minus}, {p_plus}] do not cover "
                             f"[{p_inf}, {p_inf + c}]")

        def func(x):
            r = np.sqrt(np.sum(x * x, axis=-1))
            return p_inf + c / np.log(math.e + r)

        return cls("lh_infinity", {"p_inf": p_inf, "c": c}, p_minus, p_plus, func)

    @classmethod
    def radial_affine(cls, slope: float, intercept: float, clamp_min: float,
                      clamp_max: float, p_minus: float | None = None,
                      p_plus: float | None = None) -> "ExponentField":
        """``p(x) = clip(intercept + slope * |x|, clamp_min, clamp_max)``."""
        slope, intercept = float(slope), float(intercept)
        clamp_min, clamp_max = float(clamp_min), float(clamp_max)
        if clamp_min > clamp_max:
            raise ValueError("clamp_min must not exceed clamp_max")
        p_minus = clamp_min if p_minus is None else float(p_minus)
        p_plus = clamp_max if p_plus is None else float(p_plus)

        def func(x):
            r = np.sqrt(np.sum(x * x, axis=-1))
            return np.clip(intercept + slope * r, clamp_min, clamp_max)

        params = {"slope": slope, "intercept": intercept,
                  "clamp_min": clamp_min, "clamp_max": clamp_max}
        return cls("radial_affine", params, p_minus, p_plus, func)

    @classmethod
    def step(cls, below: float, above: float, threshold: float = 0.0,
             axis: int = 0) -> "ExponentField":
        """``below`` for ``x[axis] < threshold`` and ``above`` otherwise."""
        below, above, threshold = float(below), float(above), float(threshold)

        def func(x):
            return np.where(x[..., axis] < threshold, below, above)

        params = {"below": below, "above": above, "threshold": threshold, "axis": int(axis)}
        return cls("step", params, min(below, above), max(below, above), func)

    @classmethod
    def sampled(cls, data: GridFunction, p_minus: float, p_plus: float,
                source: str | None = None) -> "ExponentField":
        """Multilinear interpolation of grid samples, clamped to the grid and to the bounds."""
        if not data.is_scalar:
            raise ValueError("sampled exponent needs scalar data")
        grid = data.grid
        axes = [grid.axis_points(i) for i in range(grid.n)]
        lo = np.array([a[0] for a in axes])
        hi = np.array([a[-1] for a in axes])
        interp = RegularGridInterpolator(axes, data.values, method="linear")
        pm, pp = float(p_minus), float(p_plus)

        def func(x):
            flat = np.clip(x.reshape(-1, grid.n), lo, hi)
            return np.clip(interp(flat), pm, pp).reshape(x.shape[:-1])

        params = {"file": source} if source else {"grid": grid.to_dict()}
        field = cls("sampled", params, pm, pp, func)
        field.data = data
        return field

    @classmethod
    def from_callable(cls, func: Callable[[np.ndarray], np.ndarray], p_minus: float,
                      p_plus: float, name: str = "custom") -> "ExponentField":
        return cls("callable", {"name": name}, p_minus, p_plus,
                   lambda x: np.asarray(func(x), dtype=float))

    @classmethod
    def reciprocal_combination(cls, offset: float, terms: Sequence[tuple[float, "ExponentField"]],
                               kind_label: str) -> "ExponentField":
        """``1/r(x) = offset + sum_i w_i / p_i(x)``; bounds follow from the parents' bounds."""
        lo_recip, hi_recip = offset, offset
        for w, p in terms:
            a, b = w / p.p_plus, w / p.p_minus
            lo_recip += min(a, b)
            hi_recip += max(a, b)
        if not (0.0 < lo_recip and hi_recip < 1.0):
            raise ValueError(
                f"{kind_label}: reciprocal range [{lo_recip}, {hi_recip}] leaves (0, 1); "
                "the resulting exponent is not in (1, inf)"
            )
        parents = tuple(p for _, p in terms)
        weights = tuple(float(w) for w, _ in terms)

        def func(x):
            recip = np.full(x.shape[:-1], float(offset))
            for w, p in zip(weights, parents):
                recip = recip + w / p(x)
            return 1.0 / recip

        params = {"label": kind_label, "offset": float(offset), "weights": list(weights)}
        return cls("derived", params, 1.0 / hi_recip, 1.0 / lo_recip, func, parents)

    @classmethod
    def from_spec(cls, spec: dict, base_dir: str | Path | None = None) -> "ExponentField":
        """Build a field from its JSON description (see README for the schema)."""
        kind = spec.get("kind")
        pm, pp = spec.get("p_minus"), spec.get("p_plus")
        if kind == "constant":
            return cls.constant(spec["value"])
        if kind in ("lh_infinity", "lh_infinity_family"):
            return cls.lh_infinity(spec["p_inf"], spec["c"], pm, pp)
        if kind in ("radial_affine", "radial_affine_clamped"):
            return cls.radial_affine(spec["slope"], spec["intercept"], spec["clamp_min"],
                                     spec["clamp_max"], pm, pp)
        if kind == "step":
            return cls.step(spec["below"], spec["above"], spec.get("threshold", 0.0),
                            spec.get("axis", 0))
        if kind == "sampled":
            if pm is None or pp is None:
                raise ValueError("sampled exponent spec needs p_minus and p_plus")
            path = Path(spec["file"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return cls.sampled(load_grid_function(path), pm, pp, source=str(spec["file"]))
        raise ValueError(f"unknown exponent kind {kind!r}")

    # -- evaluation -------------------------------------------------------------

    def __call__(self, x) -> np.ndarray:
        x = _as_points(x)
        values = np.asarray(self._func(x), dtype=float)
        tol = _RANGE_TOL * self.p_plus
        if values.size and (values.min() < self.p_minus - tol or values.max() > self.p_plus + tol):
            raise ExponentRangeError(
                f"{self.kind} exponent left its declared range [{self.p_minus}, {self.p_plus}]: "
                f"observed [{values.min()}, {values.max()}]"
            )
        return values

    def on_grid(self, grid) -> np.ndarray:
        return self(grid.points)

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus

    def to_dict(self) -> dict:
        out = {"kind": self.kind, **self.params, "p_minus": self.p_minus, "p_plus": self.p_plus}
        if self.parents:
            out["parents"] = [p.to_dict() for p in self.parents]
        return out

    def __repr__(self) -> str:
        return f"ExponentField({self.kind}, {self.params}, [{self.p_minus}, {self.p_plus}])"

    # -- bounds on a region -------------------------------------------------------

    def bounds_on(self, region: Box) -> tuple[float, float]:
        rmin, rmax = radius_range(region)
        if self.kind == "constant":
            v = self.params["value"]
            return v, v
        if self.kind in ("lh_infinity", "radial_affine"):
            pts = np.array([[rmin], [rmax]])
            vals = self._func(np.pad(pts, ((0, 0), (0, region.n - 1))))
            return float(vals.min()), float(vals.max())
        if self.kind == "step":
            ax, t = self.params["axis"], self.params["threshold"]
            if region.upper[ax] <= t:
                v = self.params["below"]
                return v, v
            if region.lower[ax] >= t:
                v = self.params["above"]
                return v, v
            return self.p_minus, self.p_plus
        if self.kind == "derived" and len(self.parents) == 1:
            (w,) = self.params["weights"]
            lo, hi = self.parents[0].bounds_on(region)
            r_lo = 1.0 / (self.params["offset"] + w / lo)
            r_hi = 1.0 / (self.params["offset"] + w / hi)
            return min(r_lo, r_hi), max(r_lo, r_hi)
        vals = self(_dense_sample(region))
        return float(vals.min()), float(vals.max())


def _dense_sample(region: Box) -> np.ndarray:
    m = {1: 257, 2: 65, 3: 25}[region.n]
    axes = [np.linspace(lo, hi, m) for lo, hi in zip(region.lower, region.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, region.n)


def eval_exponent(p: ExponentField, x) -> np.ndarray:
    return p(x)


def conjugate_exponent(p: ExponentField) -> ExponentField:
    """Pointwise Hoelder conjugate ``1/p' + 1/p = 1``."""
    if p.p_minus <= 1:
        raise ValueError("conjugate exponent is unbounded when p_minus = 1")
    if p.kind == "constant":
        return ExponentField.constant(conjugate_value(p.params["value"]))
    return ExponentField.reciprocal_combination(1.0, [(-1.0, p)], "conjugate")


def derive_exponent(p: ExponentField, shift: float) -> ExponentField:
    """Exponent ``q`` with ``1/q(x) = 1/p(x) - shift`` (e.g. ``shift = 1/n`` gives ``p*``)."""
    shift = float(shift)
    if shift <= 0:
        raise ValueError(f"shift must be positive, got {shift}")
    if shift >= 1.0 / p.p_plus:
        raise ValueError(f"shift {shift} >= 1/p_plus = {1.0 / p.p_plus}: derived exponent is infinite")
    if p.kind == "constant":
        return ExponentField.constant(1.0 / (1.0 / p.params["value"] - shift))
    return ExponentField.reciprocal_combination(-shift, [(1.0, p)], "shifted")


def interpolate_exponent(pa: ExponentField, pb: ExponentField, theta: float) -> ExponentField:
    """``1/r(x) = theta/pa(x) + (1 - theta)/pb(x)``."""
    theta = float(theta)
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if theta == 1.0:
        return pa
    if theta == 0.0:
        return pb
    if pa.kind == "constant" and pb.kind == "constant":
        return ExponentField.constant(
            1.0 / (theta / pa.params["value"] + (1 - theta) / pb.params["value"]))
    return ExponentField.reciprocal_combination(0.0, [(theta, pa), (1 - theta, pb)], "interpolated")


def scale_exponent(p: ExponentField, tau: float) -> ExponentField:
    """The exponent ``tau * p(.)``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if p.kind == "constant":
        return ExponentField.constant(tau * p.params["value"])
    return ExponentField.reciprocal_combination(0.0, [(1.0 / tau, p)], "scaled")


def holder_exponent(p: ExponentField, q: ExponentField) -> ExponentField:
    """``r`` with ``1/r = 1/p + 1/q``; rejected when ``r`` can drop to 1 or below."""
    if 1.0 / p.p_minus + 1.0 / q.p_minus >= 1.0:
        raise ValueError("1/p + 1/q reaches 1: Hoelder exponent r_- < 1")
    if p.kind == "constant" and q.kind == "constant":
        return ExponentField.constant(1.0 / (1.0 / p.params["value"] + 1.0 / q.params["value"]))
    return ExponentField.reciprocal_combination(0.0, [(1.0, p), (1.0, q)], "holder")


def essential_bounds(p: ExponentField, region: Box | Cube) -> tuple[float, float]:
    """``(ess inf, ess sup)`` of ``p`` over ``region``.

    Exact for the analytic kinds (via monotonicity in ``|x|``); sampled and
    multi-parent fields are bounded by a dense sample of the region.
    """
    box = region.box if isinstance(region, Cube) else region
    if p.kind == "sampled":
        pts = p.data.grid.points
        inside = np.all((pts >= box.lower) & (pts <= box.upper), axis=-1)
        if inside.any():
            vals = p.data.values[inside]
            return float(vals.min()), float(vals.max())
        g = p.data.grid.box
        lo, hi = np.maximum(box.lower, g.lower), np.minimum(box.upper, g.upper)
        if np.any(lo >= hi):
            raise ValueError("region does not intersect the sampled exponent's domain")
        box = Box(tuple(lo), tuple(hi))
    return p.bounds_on(box)


@dataclass(frozen=True)
class LogHolderEstimate:
    """Sampled log-Hoelder constants.

    ``c0_hat`` is a lower bound on the true local constant; it is ``inf``
    when refining the worst pairs shows ``|p(x) - p(y)| * (-log|x - y|)``
    growing without bound (a jump).
    """

    c0_hat: float
    c_inf_hat: float
    p_inf_hat: float
    sample_radius: float

    @property
    def locally_lh(self) -> bool:
        return math.isfinite(self.c0_hat)

    def to_dict(self) -> dict:
        return {"c0_hat": self.c0_hat, "c_inf_hat": self.c_inf_hat,
                "p_inf_hat": self.p_inf_hat, "sample_radius": self.sample_radius}


def _unit_vectors(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _jump_grows(p: ExponentField, x: np.ndarray, y: np.ndarray) -> bool:
    """Bisect a pair towards the larger increment; report unbounded growth of the LH ratio."""
    dp = lambda a, b: abs(float(p(a) - p(b)))  # noqa: E731
    ratio_at = {}
    d = float(np.linalg.norm(x - y))
    while d > 1e-13:
        m = 0.5 * (x + y)
        if dp(x, m) >= dp(m, y):
            y = m
        else:
            x = m
        d *= 0.5
        if d < 1e-6 and "coarse" not in ratio_at:
            ratio_at["coarse"] = dp(x, y) * -math.log(d)
    fine = dp(x, y) * -math.log(d)
    coarse = ratio_at.get("coarse", 0.0)
    return coarse > 0 and fine > 1.5 * coarse


def estimate_lh_constants(p: ExponentField, domain: Box, scan_radius: float = 1e3,
                          seed: int = 0, n_base: int = 512, n_dist: int = 40) -> LogHolderEstimate:
    """Estimate ``C_0``, ``C_inf`` and ``p_inf`` by deterministic sampling.

    Local constant: scrambled Halton base points in ``domain``, partner points
    at log-spaced distances in ``(1e-6, 1/2)`` along random directions.
    Constant at infinity: log-spaced radii out to ``scan_radius``; ``p_inf`` is
    the minimiser of ``sup_x |p(x) - c| log(e + |x|)`` found by ternary search
    (the objective is convex in ``c``).
    """
    if scan_radius <= 0:
        raise ValueError("scan_radius must be positive")
    n = domain.n
    rng = np.random.Generator(np.random.Philox(seed))
    unit = qmc.Halton(d=n, scramble=True, seed=seed).random(n_base)
    base = np.asarray(domain.lower) + unit * domain.widths
    dists = np.logspace(-6, math.log10(0.5), n_dist, endpoint=False)
    xs = np.repeat(base, n_dist, axis=0)
    ds = np.tile(dists, n_base)
    ys = xs + ds[:, None] * _unit_vectors(rng, len(xs), n)
    keep = domain.contains(ys)
    xs, ys, ds = xs[keep], ys[keep], ds[keep]
    ratios = np.abs(p(xs) - p(ys)) * -np.log(ds)
    c0 = float(ratios.max()) if ratios.size else 0.0
    if c0 > 0:
        worst = np.argsort(-ratios, kind="stable")[:8]
        if any(_jump_grows(p, xs[i].copy(), ys[i].copy()) for i in worst):
            c0 = math.inf

    radii = np.concatenate([[0.0], np.logspace(-3, math.log10(scan_radius), 400)])
    pts = np.repeat(radii, 4)[:, None] * _unit_vectors(rng, 4 * len(radii), n)
    vals = p(pts)
    weight = np.log(math.e + np.linalg.norm(pts, axis=1))
    objective = lambda c: float(np.max(np.abs(vals - c) * weight))  # noqa: E731
    lo, hi = float(vals.min()), float(vals.max())
    for _ in range(200):
        m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if objective(m1) <= objective(m2):
            hi = m2
        else:
            lo = m1
    p_inf = 0.5 * (lo + hi)
    return LogHolderEstimate(c0, objective(p_inf), p_inf, float(scan_radius))


def _cube_points(Q: Cube, m: int | None) -> np.ndarray:
    n = Q.n
    if m is None:
        m = {1: 256, 2: 48, 3: 16}[n]
    grid = make_grid(Q.box, (m,) * n)
    return grid.points.reshape(-1, n)


def harmonic_mean(p: ExponentField, Q: Cube, points_per_axis: int | None = None) -> float:
    """``p_Q`` with ``1/p_Q`` equal to the average of ``1/p`` over ``Q`` (midpoint rule)."""
    if p.kind == "constant":
        return p.params["value"]
    recip = 1.0 / p(_cube_points(Q, points_per_axis))
    return float(1.0 / np.mean(recip))
