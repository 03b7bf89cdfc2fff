"""Power weights, cube averages and the two-weight condition for ``I_alpha``.

The central quantity is the cube functional

    V(Q) = |Q|^{alpha/n + 1/q_Q - 1/p_Q}
           * (avg_Q |x|^{a r q+})^{1/(r q+)}
           * (avg_Q |x|^{-b s (p-)'})^{1/(s (p-)')}

whose supremum over all cubes controls the weighted bound
``|| |x|^a I_alpha f ||_q <= C || |x|^b f ||_p``.  :func:`scan_condition`
evaluates ``V`` over a dyadic family of cubes and reads boundedness off the
log-log slope of the per-scale maxima.

Power averages ``(avg_Q |x|^gamma)^{1/gamma}`` are computed by quadrature
that is exact up to Gauss-Legendre error even when ``Q`` touches the
origin.  For a corner box ``[0, t]`` the divergence theorem applied to
``y |y|^gamma`` gives

    int_[0,t] |y|^gamma dy = (1/(n+gamma)) sum_i t_i int_{face_i} |y|^gamma dS,

where ``face_i = {y_i = t_i}`` keeps a positive distance from the
singularity.  General cubes follow by inclusion-exclusion over corners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
import itertools

import numpy as np

from ._parallel import pmap
from .exponents import (
    ExponentField,
    conjugate_value,
    estimate_lh_constants,
    harmonic_mean,
    _cube_points,
)
from .grid import Box, Cube
from .norms import norm_of_samples

__all__ = [
    "PowerWeight",
    "SteinWeissParams",
    "CubeFamily",
    "ConditionReport",
    "AdmissibilityReport",
    "IntegrabilityError",
    "power_avg",
    "lemma1_bound",
    "check_admissible",
    "mp_condition_value",
    "scan_condition",
    "choose_mp_exponents",
    "fit_slope",
]

BALANCE_TOL = 1e-9
DIVERGENT_SLOPE = 0.1
BOUNDED_SLOPE = 0.05
SLOPE_SCALES = 4
_GL_FAR = 20
_GL_PANEL = 10


class IntegrabilityError(ValueError):
    """A power average over a cube diverges."""


@dataclass(frozen=True)
class PowerWeight:
    """``w(x) = |x|^gamma`` with ``gamma > -n`` (local integrability)."""

    gamma: float
    n: int

    def __post_init__(self):
        if not self.gamma > -self.n:
            raise ValueError(f"|x|^{self.gamma} is not locally integrable in dimension {self.n}")

    def __call__(self, x) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        with np.errstate(divide="ignore"):
            return r**self.gamma

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "n": self.n}


# ------------------------------------------------------------ quadrature


@lru_cache(maxsize=None)
def _gauss(m: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(m)
    return nodes, weights


def _rule_on(breaks: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights over consecutive breakpoints."""
    x0, w0 = _gauss(m)
    a, b = breaks[:-1, None], breaks[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x0
    weights = 0.5 * (b - a) * w0
    return nodes.ravel(), weights.ravel()


def _graded_breaks(length: float, scale: float) -> np.ndarray:
    """``0, scale, 2 scale, 4 scale, ... , length``: panels refined toward 0."""
    scale = max(scale, length * 2.0**-40)
    breaks = [0.0]
    edge = scale
    while edge < length:
        breaks.append(edge)
        edge *= 2.0
    breaks.append(length)
    return np.array(breaks)


def _integrand(r2: np.ndarray, gamma: float) -> np.ndarray:
    if gamma == "log":
        return 0.5 * np.log(r2)
    return r2 ** (0.5 * gamma)


def _face_integral(height: float, extents: list[float], gamma) -> float:
    """``int_{prod [0, extents]} g(sqrt(height^2 + |z|^2)) dz``, graded toward ``z = 0``."""
    if not extents:
        return float(_integrand(np.array(height * height), gamma))
    rules = [_rule_on(_graded_breaks(T, height), _GL_PANEL) for T in extents]
    mesh = np.meshgrid(*(r[0] for r in rules), indexing="ij")
    wts = np.meshgrid(*(r[1] for r in rules), indexing="ij")
    r2 = height * height + sum(z * z for z in mesh)
    return float(np.sum(np.prod(wts, axis=0) * _integrand(r2, gamma)))


def _corner_integral(t: np.ndarray, gamma) -> float:
    """``int_{[0,t]} g(|y|) dy`` for ``t >= 0`` by the pyramid decomposition."""
    if np.any(t == 0):
        return 0.0
    n = len(t)
    flux = 0.0
    for i in range(n):
        others = [float(t[j]) for j in range(n) if j != i]
        flux += float(t[i]) * _face_integral(float(t[i]), others, gamma)
    if gamma == "log":
        return (flux - float(np.prod(t))) / n
    return flux / (n + gamma)


def _near_integral(lower: np.ndarray, upper: np.ndarray, gamma) -> float:
    """Inclusion-exclusion of corner integrals (uses evenness in every coordinate)."""
    total = 0.0
    for choice in itertools.product((0, 1), repeat=len(lower)):
        corner = np.where(np.array(choice) == 1, upper, lower)
        sign = np.prod([(1 if c else -1) * np.sign(v) for c, v in zip(choice, corner)])
        if sign != 0:
            total += sign * _corner_integral(np.abs(corner), gamma)
    return total


def _tensor_integral(lower: np.ndarray, upper: np.ndarray, gamma) -> float:
    x0, w0 = _gauss(_GL_FAR)
    axes = [0.5 * (lo + hi) + 0.5 * (hi - lo) * x0 for lo, hi in zip(lower, upper)]
    wts = [0.5 * (hi - lo) * w0 for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*wts, indexing="ij")
    r2 = sum(m * m for m in mesh)
    return float(np.sum(np.prod(wmesh, axis=0) * _integrand(r2, gamma)))


def _dist(lower: np.ndarray, upper: np.ndarray) -> float:
    gap = np.maximum(np.maximum(lower, -upper), 0.0)
    return float(np.linalg.norm(gap))


def _box_integral(lower: np.ndarray, upper: np.ndarray, gamma, depth: int = 0) -> float:
    side = float(np.max(upper - lower))
    d = _dist(lower, upper)
    if d >= 0.5 * side:
        return _tensor_integral(lower, upper, gamma)
    if gamma == "log" or gamma > -len(lower):
        return _near_integral(lower, upper, gamma)
    # gamma <= -n on a cube that misses the origin: split toward the singularity
    if depth > 60:
        raise IntegrabilityError("cube is too close to the origin for gamma <= -n")
    mid = 0.5 * (lower + upper)
    total = 0.0
    for choice in itertools.product((0, 1), repeat=len(lower)):
        c = np.array(choice)
        lo = np.where(c == 1, mid, lower)
        hi = np.where(c == 1, upper, mid)
        total += _box_integral(lo, hi, gamma, depth + 1)
    return total


@lru_cache(maxsize=65536)
def _unit_average(center: tuple[float, ...], gamma) -> float:
    """Average of ``|x|^gamma`` (or ``log|x|``) over the unit-side cube at ``center``."""
    c = np.array(center)
    return _box_integral(c - 0.5, c + 0.5, gamma)


def _normalized_center(Q: Cube) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(Q.center, dtype=float) / Q.side)


def power_avg(Q: Cube, gamma: float) -> float:
    """``((1/|Q|) int_Q |x|^gamma dx)^{1/gamma}``.

    Parameters
    ----------
    Q : Cube
        The cube; the quantity is positively homogeneous of degree 1 in
        ``Q``, so it is computed on the unit-side copy and rescaled.
    gamma : float
        Power.  ``gamma = 0`` returns the geometric mean
        ``exp(avg_Q log|x|)``, the limit as ``gamma -> 0``.

    Raises
    ------
    IntegrabilityError
        If ``gamma <= -n`` and the closed cube contains the origin.
    """
    n = Q.n
    gamma = float(gamma)
    if gamma <= -n and Q.dist_to_origin() == 0.0:
        raise IntegrabilityError(f"avg of |x|^{gamma} diverges on a cube touching the origin (n={n})")
    center = _normalized_center(Q)
    if gamma == 0.0:
        return Q.side * math.exp(_unit_average(center, "log"))
    avg = _unit_average(center, gamma)
    return Q.side * avg ** (1.0 / gamma)


def lemma1_bound(Q: Cube) -> tuple[str, float]:
    """``("near", side)`` if ``dist(Q, 0) <= side`` (ties go near), else ``("far", |c_Q|)``."""
    if Q.dist_to_origin() <= Q.side * (1 + 1e-12):
        return "near", Q.side
    return "far", Q.center_norm


# ------------------------------------------------------------ cube family


def _directions(n: int) -> list[np.ndarray]:
    """Axis, face-diagonal and body-diagonal placements (mirrored axes fill low n)."""
    e = np.eye(n)
    if n == 1:
        return [e[0], -e[0]]
    if n == 2:
        return [e[0], e[0] + e[1], -e[1]]
    return [e[0], e[0] + e[1], np.ones(n)]


@dataclass(frozen=True)
class CubeFamily:
    """Dyadic cubes ``side = 2^k`` placed at fixed multiples of their side.

    At every scale: one cube centred at the origin, plus cubes whose
    distance to the origin is ``d * side`` for each ``d`` in ``distances``
    (0 means touching), along each placement direction.
    """

    n: int
    k_min: int = -10
    k_max: int = 10
    distances: tuple[float, ...] = (0.0, 1.0, 4.0, 32.0, 1024.0)
    include_origin: bool = True

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        if not self.include_origin and not self.distances:
            raise ValueError("cube family would be empty")
        if any(d < 0 for d in self.distances):
            raise ValueError("distances must be non-negative")

    @property
    def scales(self) -> list[int]:
        return list(range(self.k_min, self.k_max + 1))

    def unit_centers(self) -> list[np.ndarray]:
        """Centres of the side-1 cubes; every scale reuses them."""
        centers = [np.zeros(self.n)] if self.include_origin else []
        for d in self.distances:
            for v in _directions(self.n):
                m = int(np.count_nonzero(v))
                centers.append(v * (d / math.sqrt(m) + 0.5))
        return centers

    def cubes_at(self, k: int) -> list[Cube]:
        side = 2.0**k
        return [Cube(tuple(side * c), side) for c in self.unit_centers()]

    def cubes(self) -> list[tuple[int, Cube]]:
        return [(k, Q) for k in self.scales for Q in self.cubes_at(k)]

    def to_dict(self) -> dict:
        return {"n": self.n, "k_min": self.k_min, "k_max": self.k_max,
                "distances": list(self.distances), "include_origin": self.include_origin}


# ------------------------------------------------------ Stein-Weiss data


@dataclass(frozen=True)
class SteinWeissParams:
    """Data ``(alpha, a, b, p, q)`` with averaging exponents ``mp_r, mp_s > 1``.

    Only ``mp_r, mp_s > 1`` is enforced here.  The remaining hypotheses
    (strip condition, balance, integrability of both averages) are reported
    by :func:`check_admissible`, so deliberately violated data can still be
    scanned.
    """

    alpha: float
    a: float
    b: float
    p: ExponentField
    q: ExponentField
    mp_r: float = 2.0
    mp_s: float = 2.0

    def __post_init__(self):
        if not (self.mp_r > 1 and self.mp_s > 1):
            raise ValueError(f"mp_r and mp_s must exceed 1, got {self.mp_r}, {self.mp_s}")

    @classmethod
    def with_chosen_mp(cls, alpha: float, a: float, b: float, p: ExponentField,
                       q: ExponentField, n: int) -> "SteinWeissParams":
        r, s = choose_mp_exponents(a, b, p, q, n)
        return cls(alpha, a, b, p, q, r, s)

    @property
    def gamma_u(self) -> float:
        return self.a * self.mp_r * self.q.p_plus

    @property
    def gamma_v(self) -> float:
        return -self.b * self.mp_s * conjugate_value(self.p.p_minus)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "a": self.a, "b": self.b, "p": self.p.to_dict(),
                "q": self.q.to_dict(), "mp_r": self.mp_r, "mp_s": self.mp_s}


def choose_mp_exponents(a: float, b: float, p: ExponentField, q: ExponentField,
                        n: int, eps: float = 1e-12) -> tuple[float, float]:
    """Midpoints of the feasible intervals ``1 < r < n/(-a q+)`` and ``1 < s < n/(b (p-)')``."""
    if a < 0:
        r = 0.5 * (1 + n / max(eps, -a * q.p_plus))
    else:
        r = 2.0
    if b > 0:
        s = 0.5 * (1 + n / max(eps, b * conjugate_value(p.p_minus)))
    else:
        s = 2.0
    return max(r, 1 + eps), max(s, 1 + eps)


@dataclass
class AdmissibilityReport:
    violations: list[dict] = field(default_factory=list)
    lh: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, check: str, detail: str) -> None:
        self.violations.append({"check": check, "detail": detail})

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": self.violations, "lh": self.lh}


def _sample_points(n: int) -> np.ndarray:
    m = {1: 401, 2: 41, 3: 15}[n]
    axis = np.linspace(-4.0, 4.0, m)
    mesh = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    radii = np.logspace(-6, 6, 121)
    dirs = [np.eye(n)[0], -np.eye(n)[0], np.ones(n) / math.sqrt(n)]
    rays = np.concatenate([radii[:, None] * d for d in dirs])
    return np.concatenate([mesh, rays])


def check_admissible(params: SteinWeissParams, n: int, seed: int = 0) -> AdmissibilityReport:
    """Check every hypothesis of the weighted Stein-Weiss bound; never raises.

    ``seed`` drives the random pairs of the log-Hoelder estimate.
    """
    rep = AdmissibilityReport()
    alpha, a, b, p, q = params.alpha, params.a, params.b, params.p, params.q
    if not 0 < alpha < n:
        rep.add("alpha", f"alpha={alpha} is not in (0, {n})")
    lower = -n / q.p_plus
    upper = n / conjugate_value(p.p_minus)
    if not lower < a:
        rep.add("strip", f"a={a} is not > -n/q+ = {lower}")
    if not a <= b:
        rep.add("strip", f"a={a} exceeds b={b}")
    if not b < upper:
        rep.add("strip", f"b={b} is not < n/(p-)' = {upper}")
    pts = _sample_points(n)
    try:
        pv, qv = p(pts), q(pts)
    except ValueError as exc:
        rep.add("exponent", str(exc))
        return rep
    defect = np.abs(1 / pv - 1 / qv - alpha / n - (a - b) / n)
    if float(defect.max()) > BALANCE_TOL:
        rep.add("balance", f"max |1/p - 1/q - alpha/n - (a-b)/n| = {float(defect.max()):.3e}")
    if np.any(pv > qv * (1 + 1e-12)):
        rep.add("p<=q", "p(x) > q(x) at some sample point")
    for name, field_ in (("p", p), ("q", q)):
        est = estimate_lh_constants(field_, Box.cube(2.0, n), seed=seed)
        rep.lh[name] = est.to_dict()
        if not est.locally_lh:
            rep.add("log_holder", f"{name} fails the local log-Hoelder condition")
    if not params.gamma_u > -n:
        rep.add("integrability", f"a*mp_r*q+ = {params.gamma_u} is not > -n")
    if not params.gamma_v > -n:
        rep.add("integrability", f"-b*mp_s*(p-)' = {params.gamma_v} is not > -n")
    return rep


def mp_condition_value(Q: Cube, params: SteinWeissParams, n: int, mode: str = "average") -> float:
    """The cube functional ``V(Q)``.

    ``mode="average"`` uses ``|Q|^{1/q_Q - 1/p_Q}`` from harmonic means;
    ``mode="norm"`` replaces it by ``||chi_Q||_q / ||chi_Q||_p`` computed
    with Luxemburg norms on the same cube sample.

    Raises
    ------
    IntegrabilityError
        If either weight average diverges on ``Q``.
    """
    if Q.n != n:
        raise ValueError("cube dimension does not match n")
    vol = Q.volume
    if mode == "average":
        p_Q = harmonic_mean(params.p, Q)
        q_Q = harmonic_mean(params.q, Q)
        log_value = (params.alpha / n + 1 / q_Q - 1 / p_Q) * math.log(vol)
    elif mode == "norm":
        pts = _cube_points(Q, None)
        ones = np.ones(len(pts))
        w = vol / len(pts)
        nq = norm_of_samples(ones, params.q(pts), w).value
        np_ = norm_of_samples(ones, params.p(pts), w).value
        log_value = params.alpha / n * math.log(vol) + math.log(nq) - math.log(np_)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if params.a != 0:
        log_value += params.a * math.log(power_avg(Q, params.gamma_u))
    if params.b != 0:
        log_value -= params.b * math.log(power_avg(Q, params.gamma_v))
    return math.exp(log_value)


# ------------------------------------------------------------------ scan


@dataclass
class ConditionReport:
    sup: float
    argmax: Cube | None
    per_scale: list[dict]
    slope_small: float
    slope_large: float
    verdict: str
    n_cubes: int

    def to_dict(self) -> dict:
        return {
            "sup": _json_float(self.sup),
            "argmax": self.argmax.to_dict() if self.argmax is not None else None,
            "per_scale": [{"k": e["k"], "max": _json_float(e["max"])} for e in self.per_scale],
            "slope_small": _json_float(self.slope_small),
            "slope_large": _json_float(self.slope_large),
            "verdict": self.verdict,
            "n_cubes": self.n_cubes,
        }


def _json_float(x: float):
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def fit_slope(log_x: np.ndarray, log_y: np.ndarray) -> float:
    """Least-squares slope; non-finite data gives ``nan``."""
    log_x, log_y = np.asarray(log_x, float), np.asarray(log_y, float)
    if not (np.all(np.isfinite(log_x)) and np.all(np.isfinite(log_y))):
        return math.nan
    return float(np.polyfit(log_x, log_y, 1)[0])


def _safe_value(Q: Cube, params: SteinWeissParams, n: int) -> float:
    try:
        return mp_condition_value(Q, params, n)
    except IntegrabilityError:
        return math.inf


def scan_condition(family: CubeFamily, params: SteinWeissParams, n: int) -> ConditionReport:
    """Evaluate ``V`` over the family and diagnose growth at both ends.

    Slopes are ``d log(max_k V) / d log|Q|`` fitted over the four smallest
    and four largest scales, so a functional equal to ``|Q|^e`` has slope
    ``e`` in every dimension.  Verdict: ``divergent`` if any value is
    infinite, ``slope_small < -0.1`` or ``slope_large > 0.1``; ``bounded``
    if ``slope_small >= -0.05`` and ``slope_large <= 0.05``; otherwise
    ``inconclusive``.
    """
    if family.n != n:
        raise ValueError("family dimension does not match n")
    items = family.cubes()
    values = pmap(lambda item: _safe_value(item[1], params, n), items)
    per_scale: dict[int, float] = {}
    best, best_cube = -math.inf, None
    for (k, Q), v in zip(items, values):
        per_scale[k] = max(per_scale.get(k, -math.inf), v)
        if v > best or (v == best and best_cube is not None and Q.sort_key() < best_cube.sort_key()):
            best, best_cube = v, Q
    ks = sorted(per_scale)
    maxima = np.array([per_scale[k] for k in ks])
    log_vol = np.array(ks, dtype=float) * n * math.log(2.0)
    m = min(SLOPE_SCALES, len(ks))
    if m >= 2:
        with np.errstate(divide="ignore"):
            logs = np.log(maxima)
        slope_small = fit_slope(log_vol[:m], logs[:m])
        slope_large = fit_slope(log_vol[-m:], logs[-m:])
    else:
        slope_small = slope_large = math.nan
    if (not np.all(np.isfinite(maxima)) or slope_small < -DIVERGENT_SLOPE
            or slope_large > DIVERGENT_SLOPE):
        verdict = "divergent"
    elif slope_small >= -BOUNDED_SLOPE and slope_large <= BOUNDED_SLOPE:
        verdict = "bounded"
    else:
        verdict = "inconclusive"
    return ConditionReport(
        sup=best, argmax=best_cube,
        per_scale=[{"k": k, "max": per_scale[k]} for k in ks],
        slope_small=slope_small, slope_large=slope_large,
        verdict=verdict, n_cubes=len(items),
    )
