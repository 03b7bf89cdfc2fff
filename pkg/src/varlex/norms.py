"""Modular and Luxemburg norm of sampled functions in ``L^{p(.)}``.

With bounded exponents the modular ``lambda -> rho(f / lambda)`` is
continuous and strictly decreasing, so the Luxemburg norm is its unique
crossing of 1.  It is located by bracketing and bisection on ``log lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponents import (
    ExponentField,
    holder_exponent,
    scale_exponent,
    _cube_points,
)
from .grid import Box, Cube, GridFunction

__all__ = [
    "NormResult",
    "modular",
    "luxemburg_norm",
    "norm_of_samples",
    "modular_of_samples",
    "lp_norm",
    "check_rescaling",
    "check_holder",
    "char_fn_norm_ratio",
    "holder_constant",
]

MODULAR_TOL = 1e-10
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class NormResult:
    value: float
    modular_at_value: float
    iterations: int
    bracket: tuple[float, float]

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {"value": self.value, "modular_at_value": self.modular_at_value,
                "iterations": self.iterations}


def _region_mask(grid, omega: Box | None) -> np.ndarray | None:
    if omega is None:
        return None
    return omega.contains(grid.points)


def modular_of_samples(absf: np.ndarray, pvals: np.ndarray, weight) -> float:
    """``sum_j w_j |f_j|^{p_j}``; ``weight`` is the cell volume or a per-sample array."""
    absf = np.asarray(absf, dtype=float)
    nz = absf > 0
    w = weight[nz] if np.ndim(weight) else weight
    with np.errstate(over="ignore"):
        return float(np.sum(w * np.exp(pvals[nz] * np.log(absf[nz]))))


def norm_of_samples(absf: np.ndarray, pvals: np.ndarray, weight,
                    tol: float = MODULAR_TOL, max_iter: int = MAX_BISECTIONS,
                    closed_form: bool = True) -> NormResult:
    """Luxemburg norm of samples ``|f_j|`` with exponents ``p_j`` and quadrature weights.

    With ``closed_form`` a constant exponent short-cuts to ``(sum w |f|^p)^{1/p}``;
    otherwise the root of the modular is always found by bisection.
    """
    absf = np.abs(np.asarray(absf, dtype=float))
    pvals = np.broadcast_to(np.asarray(pvals, dtype=float), absf.shape).ravel()
    w_all = np.broadcast_to(np.asarray(weight, dtype=float), absf.shape).ravel()
    absf = absf.ravel()
    nz = absf > 0
    if not nz.any():
        return NormResult(0.0, 0.0, 0, (0.0, 0.0))
    logf = np.log(absf[nz])
    pv = pvals[nz]
    w = w_all[nz]
    logw = np.log(w)
    if closed_form and pv.min() == pv.max():
        # constant exponent: the root of rho = 1 is (sum w |f|^p)^{1/p}
        p0 = float(pv[0])
        terms = p0 * logf + logw
        top = float(terms.max())
        log_norm = (top + math.log(float(np.sum(np.exp(terms - top))))) / p0
        return NormResult(math.exp(log_norm), 1.0, 0, (math.exp(log_norm), math.exp(log_norm)))

    def rho(loglam: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.sum(np.exp(pv * (logf - loglam) + logw)))

    # lambda_0 = rho(f)^(1/p_-), computed in log space to survive extreme magnitudes
    terms = pv * logf + logw
    top = float(terms.max())
    log_rho0 = top + math.log(float(np.sum(np.exp(terms - top))))
    lo = hi = log_rho0 / float(pv.min())
    iterations = 0
    step = math.log(2.0)
    while rho(lo) <= 1.0:
        lo -= step
        iterations += 1
    while rho(hi) >= 1.0:
        hi += step
        iterations += 1
    mid = 0.5 * (lo + hi)
    value_rho = rho(mid)
    for _ in range(max_iter):
        iterations += 1
        if abs(value_rho - 1.0) <= tol:
            break
        if value_rho > 1.0:
            lo = mid
        else:
            hi = mid
        new_mid = 0.5 * (lo + hi)
        if new_mid == mid:
            break
        mid = new_mid
        value_rho = rho(mid)
    if not math.isfinite(value_rho):
        raise OverflowError("modular overflowed at every lambda")
    return NormResult(math.exp(mid), value_rho, iterations, (math.exp(lo), math.exp(hi)))


def _samples(f: GridFunction, p: ExponentField, omega: Box | None):
    grid = f.grid
    absf = f.magnitude()
    pvals = p.on_grid(grid)
    mask = _region_mask(grid, omega)
    if mask is not None:
        absf, pvals = absf[mask], pvals[mask]
    return absf, pvals, grid.cell_volume


def modular(f: GridFunction, p: ExponentField, omega: Box | None = None) -> float:
    """``int_omega |f(x)|^{p(x)} dx`` by the midpoint rule (vector ``f`` uses ``|f|``)."""
    return modular_of_samples(*_samples(f, p, omega))


def luxemburg_norm(f: GridFunction, p: ExponentField, omega: Box | None = None,
                   tol: float = MODULAR_TOL) -> NormResult:
    """``inf{lambda > 0 : rho(f / lambda) <= 1}`` over the cells of ``omega`` (default: all).

    Always solved by bisection, so it can be checked against :func:`lp_norm`.
    """
    absf, pvals, w = _samples(f, p, omega)
    return norm_of_samples(absf, pvals, w, tol=tol, closed_form=False)


def lp_norm(f: GridFunction, p: float, omega: Box | None = None) -> float:
    """Closed-form constant-exponent norm ``(sum |f|^p h^n)^{1/p}``."""
    absf = f.magnitude()
    mask = _region_mask(f.grid, omega)
    if mask is not None:
        absf = absf[mask]
    return float(np.sum(absf**p) * f.grid.cell_volume) ** (1.0 / p)


def check_rescaling(f: GridFunction, p: ExponentField, tau: float,
                    omega: Box | None = None) -> tuple[float, float]:
    """Both sides of ``|| |f|^tau ||_{p} = ||f||_{tau p}^tau``."""
    if tau < 1:
        raise ValueError("rescaling needs tau >= 1")
    f_tau = GridFunction(f.grid, f.magnitude() ** tau)
    lhs = luxemburg_norm(f_tau, p, omega).value
    rhs = luxemburg_norm(f, scale_exponent(p, tau), omega).value ** tau
    return lhs, rhs


def holder_constant(p: ExponentField, q: ExponentField) -> float:
    """Slack allowed in the generalized Hoelder check: 1 (+1e-6) for constants, else 2."""
    return 1.0 + 1e-6 if (p.is_constant and q.is_constant) else 2.0


def check_holder(f: GridFunction, g: GridFunction, p: ExponentField,
                 q: ExponentField, omega: Box | None = None) -> tuple[float, float]:
    """``(||f g||_r, ||f||_p ||g||_q)`` with ``1/r = 1/p + 1/q``.

    Constant exponents with ``1/p + 1/q = 1`` use the ``L^1`` norm; otherwise
    ``r`` must stay above 1.
    """
    fg = GridFunction(f.grid, f.magnitude() * g.magnitude())
    if p.is_constant and q.is_constant and abs(1 / p.p_minus + 1 / q.p_minus - 1) < 1e-12:
        lhs = lp_norm(fg, 1.0, omega)
    else:
        lhs = luxemburg_norm(fg, holder_exponent(p, q), omega).value
    rhs = luxemburg_norm(f, p, omega).value * luxemburg_norm(g, q, omega).value
    return lhs, rhs


def char_fn_norm_ratio(Q: Cube, p: ExponentField, points_per_axis: int | None = None) -> float:
    """``||chi_Q||_{p(.)} / |Q|^{1/p_Q}``, both computed on the same midpoint sample of ``Q``."""
    pts = _cube_points(Q, points_per_axis)
    pvals = p(pts)
    weight = Q.volume / len(pts)
    norm = norm_of_samples(np.ones(len(pts)), pvals, weight).value
    p_Q = 1.0 / float(np.mean(1.0 / pvals))
    return norm / Q.volume ** (1.0 / p_Q)
