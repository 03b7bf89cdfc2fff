"""Empirical verification of weighted Hardy, Sobolev, Poincare and
Gagliardo-Nirenberg type inequalities in variable Lebesgue spaces.

Each inequality ``LHS(f) <= C RHS(f)`` is evaluated on families of smooth
compactly supported bumps.  The largest observed ratio is a lower bound
on the best constant ``C``; :func:`verify_theorem` repeats the search on
dyadically refined grids and flags growth.

The bump families are self-similar across resolutions: the narrowest
member always spans ``min_cells`` cells.  When an inequality is scale
invariant its sup ratio therefore stabilises under refinement, while a
scale mismatch shows up as geometric growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._parallel import pmap
from .exponents import (
    ExponentField,
    conjugate_value,
    derive_exponent,
    estimate_lh_constants,
    interpolate_exponent,
)
from .grid import Box, Grid, GridFunction, gradient, make_grid
from .norms import norm_of_samples
from .operators import FracLapParams, frac_laplacian_fourier, frac_laplacian_integral
from .weights import SteinWeissParams, check_admissible

__all__ = [
    "KINDS",
    "FAMILY_KINDS",
    "HypothesisError",
    "InequalityKind",
    "TestFamily",
    "Record",
    "InequalityReport",
    "VerificationResult",
    "default_kind",
    "default_family",
    "bump",
    "mean_value",
    "evaluate",
    "estimate_constant",
    "verify_theorem",
    "default_resolutions",
]

KINDS = (
    "HardyLeray",
    "HardySobolev",
    "GagliardoNirenberg",
    "Poincare",
    "FracHardyRellich",
    "FracHardySobolev",
    "FracGagliardoNirenberg",
)
FRACTIONAL = ("FracHardyRellich", "FracHardySobolev", "FracGagliardoNirenberg")
FAMILY_KINDS = ("radial_bump", "shifted_bump", "anisotropic_bump", "oscillating_bump")

RHS_FLOOR = 1e-14
GROWTH_TOL = 0.10
_GOLDEN = (math.sqrt(5) - 1) / 2


class HypothesisError(ValueError):
    """Parameters violate the hypotheses of the inequality."""


# ----------------------------------------------------------------- kinds


@dataclass(frozen=True)
class InequalityKind:
    """An inequality together with its parameters.

    Attributes
    ----------
    tag : str
        One of :data:`KINDS`.
    n : int
        Dimension.
    p : ExponentField
        Exponent of the right-hand side.
    q : ExponentField or None
        Left-hand exponent (Sobolev and Poincare kinds) or the auxiliary
        exponent of the interpolation kinds.  Ignored by ``HardyLeray`` and
        ``FracHardyRellich`` where it equals ``p``.
    a, b : float
        Powers of ``|x|`` on the left and right.
    s : float
        Fractional order (fractional kinds only).
    theta : float
        Interpolation parameter (Gagliardo-Nirenberg kinds only).
    omega : Box or None
        Domain of the Poincare inequality.
    """

    tag: str
    n: int
    p: ExponentField
    q: ExponentField | None = None
    a: float = 0.0
    b: float = 0.0
    s: float = 0.5
    theta: float = 0.5
    omega: Box | None = None

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ValueError(f"unknown inequality kind {self.tag!r}; expected one of {KINDS}")
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.n}")
        if self.tag in ("HardySobolev", "Poincare", "FracHardySobolev",
                        "GagliardoNirenberg", "FracGagliardoNirenberg") and self.q is None:
            raise ValueError(f"{self.tag} needs an exponent q")
        if self.tag == "Poincare" and self.omega is None:
            raise ValueError("Poincare needs a domain omega")
        if self.tag in FRACTIONAL and not 0 < self.s <= 1:
            raise ValueError(f"fractional order must lie in (0, 1], got {self.s}")

    @property
    def lhs_weight(self) -> float:
        if self.tag == "HardyLeray":
            return -1.0
        if self.tag == "FracHardyRellich":
            return -2.0 * self.s
        return self.a

    @property
    def rhs_weight(self) -> float:
        if self.tag in ("HardyLeray", "FracHardyRellich", "FracGagliardoNirenberg"):
            return 0.0
        if self.tag == "GagliardoNirenberg":
            return self.a
        return self.b

    def lhs_exponent(self) -> ExponentField:
        if self.tag in ("HardyLeray", "FracHardyRellich"):
            return self.p
        if self.tag == "GagliardoNirenberg":
            return interpolate_exponent(derive_exponent(self.p, 1.0 / self.n), self.q, self.theta)
        if self.tag == "FracGagliardoNirenberg":
            p_s = derive_exponent(self.p, 2.0 * self.s / self.n)
            return interpolate_exponent(p_s, self.q, self.theta)
        return self.q

    def violations(self, seed: int = 0) -> list[str]:
        """Hypotheses of the corresponding theorem that fail (empty when valid).

        ``seed`` drives the random pairs of the log-Hoelder estimates.
        """
        n, p = self.n, self.p
        out: list[str] = []
        if self.tag in ("HardyLeray", "HardySobolev", "FracHardyRellich", "FracHardySobolev"):
            if self.tag == "HardyLeray":
                alpha, a, b, q = 1.0, -1.0, 0.0, p
                if not p.p_plus < n:
                    out.append(f"need p+ < n, got p+={p.p_plus}")
            elif self.tag == "FracHardyRellich":
                alpha, a, b, q = 2 * self.s, -2 * self.s, 0.0, p
                if not p.p_plus < n / (2 * self.s):
                    out.append(f"need p+ < n/(2s) = {n / (2 * self.s)}, got {p.p_plus}")
            elif self.tag == "HardySobolev":
                alpha, a, b, q = 1.0, self.a, self.b, self.q
            else:
                alpha, a, b, q = 2 * self.s, self.a, self.b, self.q
            if not alpha < n:
                out.append(f"order {alpha} must be below n={n}")
                return out
            sw = SteinWeissParams.with_chosen_mp(alpha, a, b, p, q, n)
            rep = check_admissible(sw, n, seed)
            out += [f"{v['check']}: {v['detail']}" for v in rep.violations
                    if v["check"] != "integrability"]
        elif self.tag in ("GagliardoNirenberg", "FracGagliardoNirenberg"):
            shift = 1.0 / n if self.tag == "GagliardoNirenberg" else 2.0 * self.s / n
            if not p.p_plus < 1.0 / shift:
                out.append(f"need p+ < {1.0 / shift}, got {p.p_plus}")
                return out
            target = derive_exponent(p, shift)
            lo, hi = -n / target.p_plus, n / conjugate_value(p.p_minus)
            if not lo < self.a < hi:
                out.append(f"a={self.a} outside ({lo}, {hi})")
            if not 0 <= self.theta <= 1:
                out.append(f"theta={self.theta} outside [0, 1]")
            est = estimate_lh_constants(p, Box.cube(2.0, n), seed=seed)
            if not est.locally_lh:
                out.append("p fails the local log-Hoelder condition")
        else:
            out += self._poincare_violations(seed)
        return out

    def _poincare_violations(self, seed: int = 0) -> list[str]:
        n, p, q, a, b = self.n, self.p, self.q, self.a, self.b
        out = []
        if not -n / q.p_plus < a <= b < n / conjugate_value(p.p_minus):
            out.append(f"strip -n/q+ < a <= b < n/(p-)' fails for a={a}, b={b}")
        m = {1: 401, 2: 41, 3: 15}[n]
        axes = [np.linspace(lo, hi, m) for lo, hi in zip(self.omega.lower, self.omega.upper)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        pv, qv = p(pts), q(pts)
        if np.any(pv > qv * (1 + 1e-12)):
            out.append("p(x) > q(x) somewhere in omega")
        gap = 1 / pv - 1 / qv - (1 + a - b) / n
        if float(gap.max()) > 1e-9:
            out.append(f"1/p - 1/q exceeds 1/n + (a-b)/n by {float(gap.max()):.3e}")
        for name, fld in (("p", p), ("q", q)):
            if not estimate_lh_constants(fld, self.omega, seed=seed).locally_lh:
                out.append(f"{name} fails the local log-Hoelder condition")
        return out

    def require_valid(self, seed: int = 0) -> None:
        bad = self.violations(seed)
        if bad:
            raise HypothesisError(f"{self.tag}: " + "; ".join(bad))

    def to_dict(self) -> dict:
        out = {"tag": self.tag, "n": self.n, "p": self.p.to_dict(), "a": self.a, "b": self.b}
        if self.q is not None:
            out["q"] = self.q.to_dict()
        if self.tag in FRACTIONAL:
            out["s"] = self.s
        if self.tag in ("GagliardoNirenberg", "FracGagliardoNirenberg"):
            out["theta"] = self.theta
        if self.omega is not None:
            out["omega"] = self.omega.to_dict()
        return out


def default_kind(tag: str) -> InequalityKind:
    """Hypothesis-satisfying parameters used by the CLI and the test-suite."""
    lh = ExponentField.lh_infinity(1.4, 0.2)
    if tag == "HardyLeray":
        return InequalityKind(tag, 3, ExponentField.constant(2.0))
    if tag == "HardySobolev":
        q = ExponentField.reciprocal_combination(-(1 - 0.2) / 2, [(1.0, lh)], "sobolev")
        return InequalityKind(tag, 2, lh, q, a=-0.1, b=0.1)
    if tag == "GagliardoNirenberg":
        return InequalityKind(tag, 2, lh, ExponentField.constant(2.0), a=0.1, theta=0.5)
    if tag == "Poincare":
        return InequalityKind(tag, 2, lh, lh, a=-0.2, b=0.2, omega=Box.cube(1.0, 2))
    if tag == "FracHardyRellich":
        return InequalityKind(tag, 2, lh, s=0.5)
    if tag == "FracHardySobolev":
        q = ExponentField.reciprocal_combination(-(1 - 0.2) / 2, [(1.0, lh)], "sobolev")
        return InequalityKind(tag, 2, lh, q, a=-0.1, b=0.1, s=0.5)
    if tag == "FracGagliardoNirenberg":
        return InequalityKind(tag, 2, lh, ExponentField.constant(2.0), a=0.0, s=0.5, theta=0.5)
    raise ValueError(f"unknown inequality kind {tag!r}")


# ------------------------------------------------------------- families


def bump(x: np.ndarray, center, widths) -> np.ndarray:
    """``exp(1 - 1/(1 - |(x - c)/w|^2))`` inside the ellipsoid, 0 outside (peak value 1)."""
    y = (np.asarray(x, dtype=float) - np.asarray(center, dtype=float)) / np.asarray(widths, dtype=float)
    r2 = np.sum(y * y, axis=-1)
    inside = r2 < 1
    out = np.zeros(r2.shape)
    out[inside] = np.exp(1 - 1 / (1 - r2[inside]))
    return out


@dataclass(frozen=True)
class TestFamily:
    """Bumps parametrised by width and one shape parameter.

    Widths run log-uniformly from ``min_cells`` grid cells up to
    ``max_width``.  The shape parameter is the centre offset (in widths,
    along ``e_1``), the aspect ratio of the first axis, or the number of
    oscillations per width, depending on ``kind``.

    With ``profile_power = k > 0`` a radial bump is multiplied by
    ``(1 + |x|^2/d^2)^{-k/2}`` with ``d = w exp(-shape)``: it behaves like
    ``|x|^{-k}`` between ``d`` and ``w``.  The shape ("spread") is capped so
    that ``d`` stays at least ``core_min_cells`` cells wide.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str = "radial_bump"
    count: int = 8
    max_width: float = 0.9
    min_cells: float = 4.0
    shape_range: tuple[float, float] = (0.0, 0.0)
    box_half_width: float = 1.0
    profile_power: float = 0.0
    core_min_cells: float = 1.0

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.count < 1:
            raise ValueError("family must have at least one member")
        if not 0 < self.max_width:
            raise ValueError("max_width must be positive")
        lo, hi = self.shape_range
        if lo > hi:
            raise ValueError("shape_range must be increasing")
        if self.profile_power < 0:
            raise ValueError("profile_power must be non-negative")

    def width_range(self, grid: Grid) -> tuple[float, float]:
        w_min = self.min_cells * float(grid.spacing.max())
        return min(w_min, self.max_width), self.max_width

    def shape_values(self, k: int) -> np.ndarray:
        lo, hi = self.shape_range
        return np.linspace(lo, hi, k) if k > 1 else np.array([0.5 * (lo + hi)])

    def members(self, grid: Grid) -> list[tuple[float, float]]:
        """(width, shape) pairs in a fixed order."""
        w_lo, w_hi = self.width_range(grid)
        if self.shape_range[0] == self.shape_range[1] or (
                self.kind == "radial_bump" and self.profile_power == 0):
            n_w, n_s = self.count, 1
        else:
            n_s = min(3, self.count)
            n_w = max(1, math.ceil(self.count / n_s))
        widths = np.geomspace(w_lo, w_hi, n_w) if n_w > 1 else np.array([w_hi])
        out = [(float(w), float(sh)) for w in widths for sh in self.shape_values(n_s)]
        return out[: self.count] if len(out) > self.count else out

    def sample(self, grid: Grid, width: float, shape: float) -> GridFunction:
        n = grid.n
        center = np.zeros(n)
        widths = np.full(n, width)
        if self.kind == "radial_bump" and self.profile_power > 0:
            floor = self.core_min_cells * float(grid.spacing.max())
            inner = max(width * math.exp(-max(shape, 0.0)), min(floor, width))
            core = (1 + np.sum(grid.points**2, axis=-1) / inner**2) ** (-0.5 * self.profile_power)
            return GridFunction(grid, bump(grid.points, center, widths) * core)
        if self.kind == "shifted_bump":
            center[0] = shape * width
        elif self.kind == "anisotropic_bump":
            widths[0] = width * max(shape, 1e-3)
        values = bump(grid.points, center, widths)
        if self.kind == "oscillating_bump":
            values = values * np.cos(2 * np.pi * shape * grid.coords[0] / width)
        return GridFunction(grid, values)

    def describe(self, width: float, shape: float) -> str:
        label = {"radial_bump": "spread" if self.profile_power > 0 else "", "shifted_bump": "offset", "anisotropic_bump": "aspect",
                 "oscillating_bump": "freq"}[self.kind]
        text = f"{self.kind}[w={width:.6g}"
        if label:
            text += f",{label}={shape:.6g}"
        return text + "]"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "count": self.count, "max_width": self.max_width,
                "min_cells": self.min_cells, "shape_range": list(self.shape_range),
                "box_half_width": self.box_half_width, "profile_power": self.profile_power,
                "core_min_cells": self.core_min_cells}


def default_family(kind: InequalityKind) -> TestFamily:
    if kind.tag in FRACTIONAL:
        return TestFamily("radial_bump", count=6, max_width=0.9, box_half_width=2.0)
    if kind.tag == "Poincare":
        return TestFamily("shifted_bump", count=9, max_width=0.45, shape_range=(0.0, 1.0))
    if kind.tag == "HardyLeray":
        # truncations of the extremal profile |x|^{-(n-p)/p}
        k = (kind.n - kind.p.p_plus) / kind.p.p_plus
        return TestFamily("radial_bump", count=9, max_width=0.9,
                          shape_range=(0.0, 2.0), profile_power=k)
    return TestFamily("radial_bump", count=8, max_width=0.9)


# ------------------------------------------------------------ evaluation


@dataclass(frozen=True)
class Record:
    id: str
    lhs: float
    rhs: float
    ratio: float | None
    skipped: str | None = None

    def to_dict(self) -> dict:
        out = {"id": self.id, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio}
        if self.skipped:
            out["skipped"] = self.skipped
        return out


def mean_value(f: GridFunction, omega: Box) -> float:
    """Average of ``f`` over the grid cells whose centres lie in ``omega``."""
    mask = omega.contains(f.grid.points)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("omega contains no grid cells")
    return float(np.sum(f.values[mask]) / count)


def _power(grid: Grid, gamma: float) -> np.ndarray:
    if gamma == 0:
        return np.ones(grid.shape)
    r = grid.radius
    if gamma < 0 and np.any(r == 0):
        raise ValueError("a grid point sits on the origin; use an even number of points per axis")
    return r**gamma


def _frac_lap(f: GridFunction, s: float) -> GridFunction:
    if s == 1:
        return frac_laplacian_fourier(f, s)
    return frac_laplacian_integral(f, FracLapParams(s, boundary="free"))


def _norm(values: np.ndarray, grid: Grid, p: ExponentField, omega: Box | None = None) -> float:
    pts = grid.points
    if omega is not None:
        mask = omega.contains(pts)
        values, pts = values[mask], pts[mask]
    return norm_of_samples(np.abs(values), p(pts), grid.cell_volume).value


def sides(kind: InequalityKind, f: GridFunction) -> tuple[float, float]:
    """Left- and right-hand sides of ``kind`` evaluated on ``f``."""
    grid = f.grid
    tag = kind.tag
    absf = np.abs(f.values)
    w_lhs = _power(grid, kind.lhs_weight)
    if tag == "Poincare":
        centred = np.abs(f.values - mean_value(f, kind.omega))
        lhs = _norm(w_lhs * centred, grid, kind.q, kind.omega)
        grad = gradient(f).magnitude()
        rhs = _norm(_power(grid, kind.b) * grad, grid, kind.p, kind.omega)
        return lhs, rhs
    lhs = _norm(w_lhs * absf, grid, kind.lhs_exponent())
    if tag in FRACTIONAL:
        top = np.abs(_frac_lap(f, kind.s).values)
    else:
        top = gradient(f).magnitude()
    main = _norm(_power(grid, kind.rhs_weight) * top, grid, kind.p)
    if tag == "GagliardoNirenberg":
        aux = _norm(_power(grid, kind.a) * absf, grid, kind.q)
        rhs = main**kind.theta * aux ** (1 - kind.theta)
    elif tag == "FracGagliardoNirenberg":
        aux = _norm(absf, grid, kind.q)
        rhs = main**kind.theta * aux ** (1 - kind.theta)
    else:
        rhs = main
    return lhs, rhs


def evaluate(kind: InequalityKind, f: GridFunction, record_id: str = "f") -> Record:
    """``{lhs, rhs, ratio}`` for one function; a right-hand side below 1e-14 is skipped."""
    if f.grid.n != kind.n:
        raise ValueError("grid dimension does not match the inequality")
    lhs, rhs = sides(kind, f)
    if not rhs >= RHS_FLOOR:
        return Record(record_id, lhs, rhs, None, skipped="rhs below 1e-14")
    return Record(record_id, lhs, rhs, lhs / rhs)


@dataclass
class InequalityReport:
    kind: InequalityKind
    family: TestFamily
    records: list[Record]
    sup_ratio: float
    argmax: str | None
    resolution: int
    verdict: str | None = None
    tolerances: dict = field(default_factory=lambda: {"rhs_floor": RHS_FLOOR,
                                                      "growth": GROWTH_TOL})

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.tag,
            "params": self.kind.to_dict(),
            "family": self.family.to_dict(),
            "records": [r.to_dict() for r in self.records],
            "sup_ratio": self.sup_ratio,
            "argmax": self.argmax,
            "resolution": self.resolution,
            "verdict": self.verdict,
            "tolerances": self.tolerances,
        }


def _grid_for(kind: InequalityKind, family: TestFamily, resolution: int) -> Grid:
    box = kind.omega if kind.tag == "Poincare" else Box.cube(family.box_half_width, kind.n)
    return make_grid(box, resolution)


def estimate_constant(kind: InequalityKind, family: TestFamily, refine_steps: int = 2,
                      resolution: int = 32) -> InequalityReport:
    """Sup of ``lhs/rhs`` over ``family``, then golden-section refinement.

    Each refinement round searches log-width, then the shape parameter,
    inside a window around the incumbent that halves every round.  The
    incumbent is only replaced by a strictly larger ratio, so ``sup_ratio``
    never decreases with ``refine_steps``.
    """
    grid = _grid_for(kind, family, resolution)
    members = family.members(grid)

    def run(member: tuple[float, float]) -> Record:
        w, sh = member
        return evaluate(kind, family.sample(grid, w, sh), family.describe(w, sh))

    records = pmap(run, members)
    best_i = None
    for i, rec in enumerate(records):
        if rec.ratio is not None and (best_i is None or rec.ratio > records[best_i].ratio):
            best_i = i
    if best_i is None:
        return InequalityReport(kind, family, records, 0.0, None, resolution)
    best_ratio, best_member = records[best_i].ratio, members[best_i]
    w_lo, w_hi = family.width_range(grid)
    log_lo, log_hi = math.log(w_lo), math.log(w_hi)
    sh_lo, sh_hi = family.shape_range
    cache: dict[tuple[float, float], float] = {}

    def ratio_at(w: float, sh: float) -> float:
        key = (w, sh)
        if key not in cache:
            rec = run(key)
            records.append(rec)
            cache[key] = rec.ratio if rec.ratio is not None else -math.inf
        return cache[key]

    span_w, span_s = log_hi - log_lo, sh_hi - sh_lo
    for step in range(refine_steps):
        scale = 0.5**step
        w0, s0 = best_member
        for axis in ("width", "shape"):
            if axis == "width":
                centre, span, lo_b, hi_b = math.log(w0), span_w, log_lo, log_hi
            else:
                centre, span, lo_b, hi_b = s0, span_s, sh_lo, sh_hi
            if span <= 0:
                continue
            lo = max(lo_b, centre - 0.5 * span * scale)
            hi = min(hi_b, centre + 0.5 * span * scale)
            to_member = ((lambda t: (math.exp(t), s0)) if axis == "width"
                         else (lambda t, w=w0: (w, t)))
            x1, x2 = hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo)
            f1, f2 = ratio_at(*to_member(x1)), ratio_at(*to_member(x2))
            for _ in range(6):
                if f1 >= f2:
                    hi, x2, f2 = x2, x1, f1
                    x1 = hi - _GOLDEN * (hi - lo)
                    f1 = ratio_at(*to_member(x1))
                else:
                    lo, x1, f1 = x1, x2, f2
                    x2 = lo + _GOLDEN * (hi - lo)
                    f2 = ratio_at(*to_member(x2))
            for x, fx in ((x1, f1), (x2, f2)):
                if fx > best_ratio:
                    best_ratio, best_member = fx, to_member(x)
            w0, s0 = best_member
    argmax = family.describe(*best_member)
    return InequalityReport(kind, family, records, best_ratio, argmax, resolution)


@dataclass
class VerificationResult:
    verdict: str
    reports: list[InequalityReport]
    growth: list[float]

    @property
    def sup_ratios(self) -> list[float]:
        return [r.sup_ratio for r in self.reports]

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "sup_ratios": self.sup_ratios,
            "growth": self.growth,
            "resolutions": [r.resolution for r in self.reports],
            "reports": [r.to_dict() for r in self.reports],
        }


def default_resolutions(n: int) -> tuple[int, int, int]:
    return {1: (128, 256, 512), 2: (32, 64, 128), 3: (16, 32, 64)}[n]


def verify_theorem(kind: InequalityKind, family: TestFamily | None = None,
                   resolutions: tuple[int, ...] | list[int] | None = None,
                   refine_steps: int = 2, validate: bool = True,
                   seed: int = 0) -> VerificationResult:
    """Run :func:`estimate_constant` per resolution and test for growth.

    The verdict is ``"consistent"`` when no sup ratio exceeds its
    predecessor by more than 10%, else ``"suspect"``.

    Raises
    ------
    HypothesisError
        If ``validate`` is true and the parameters violate the theorem.
    """
    if validate:
        kind.require_valid(seed)
    family = family or default_family(kind)
    resolutions = resolutions or default_resolutions(kind.n)
    if len(resolutions) < 2:
        raise ValueError("need at least two resolutions")
    reports = [estimate_constant(kind, family, refine_steps, int(N)) for N in resolutions]
    sups = [r.sup_ratio for r in reports]
    growth = [(b / a - 1.0) if a > 0 else math.inf for a, b in zip(sups, sups[1:])]
    verdict = "consistent" if all(g <= GROWTH_TOL for g in growth) else "suspect"
    for r in reports:
        r.verdict = verdict
    return VerificationResult(verdict, reports, growth)


def with_params(kind: InequalityKind, **changes) -> InequalityKind:
    return replace(kind, **changes)
