"""Uniform cell-centred tensor grids on boxes in R^n (n = 1, 2, 3).

Every other module samples functions on a :class:`Grid` and integrates them
with the midpoint rule.  Sample point ``j`` along an axis sits at
``lower + (j + 1/2) * h``, so an origin-symmetric box with an even number of
points per axis never places a sample on the origin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Box",
    "Cube",
    "Grid",
    "GridFunction",
    "make_grid",
    "integrate",
    "gradient",
    "save_grid_function",
    "load_grid_function",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lower_0, upper_0] x ... x [lower_{n-1}, upper_{n-1}]``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper):
            raise ValueError(f"dimension mismatch: {len(lower)} lower vs {len(upper)} upper")
        if not 1 <= len(lower) <= 3:
            raise ValueError(f"only n in {{1, 2, 3}} is supported, got n={len(lower)}")
        if any(not (lo < hi) for lo, hi in zip(lower, upper)):
            raise ValueError(f"degenerate box {lower} -> {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @classmethod
    def cube(cls, half_width: float, n: int, center: Sequence[float] | None = None) -> "Box":
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        return cls(tuple(c - half_width), tuple(c + half_width))

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Boolean mask of points (last axis = coordinates) inside the closed box."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube with centre ``c_Q`` and side length ``l(Q)``."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        center = tuple(float(v) for v in np.atleast_1d(self.center))
        if not self.side > 0:
            raise ValueError(f"cube side must be positive, got {self.side}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "side", float(self.side))

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return self.side**self.n

    @property
    def box(self) -> Box:
        c = np.asarray(self.center)
        return Box(tuple(c - self.side / 2), tuple(c + self.side / 2))

    @property
    def center_norm(self) -> float:
        return float(np.linalg.norm(self.center))

    def dist_to_origin(self) -> float:
        """Euclidean distance from 0 to the closed cube."""
        gap = np.maximum(np.abs(self.center) - self.side / 2, 0.0)
        return float(np.linalg.norm(gap))

    def sort_key(self) -> tuple:
        return (self.side, self.center)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "side": self.side}


def radius_range(region: Box) -> tuple[float, float]:
    """Smallest and largest ``|x|`` over a closed box."""
    lo, hi = np.asarray(region.lower), np.asarray(region.upper)
    gap = np.maximum(np.maximum(lo, -hi), 0.0)
    far = np.maximum(np.abs(lo), np.abs(hi))
    return float(np.linalg.norm(gap)), float(np.linalg.norm(far))


@dataclass(frozen=True)
class Grid:
    box: Box
    points_per_axis: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.points_per_axis)
        if len(counts) != self.box.n:
            raise ValueError(
                f"points_per_axis has {len(counts)} entries for a {self.box.n}-dimensional box"
            )
        if any(c < 1 for c in counts):
            raise ValueError(f"axis counts must be positive, got {counts}")
        object.__setattr__(self, "points_per_axis", counts)

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points_per_axis

    @property
    def size(self) -> int:
        return int(np.prod(self.points_per_axis))

    @property
    def spacing(self) -> np.ndarray:
        return self.box.widths / np.asarray(self.points_per_axis)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_points(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.box.lower[axis] + (np.arange(self.points_per_axis[axis]) + 0.5) * h

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape ``grid.shape``, one per axis (``ij`` indexing)."""
        mesh = np.meshgrid(*(self.axis_points(i) for i in range(self.n)), indexing="ij")
        for m in mesh:
            m.flags.writeable = False
        return tuple(mesh)

    @cached_property
    def points(self) -> np.ndarray:
        """All sample points, shape ``grid.shape + (n,)``."""
        pts = np.stack(self.coords, axis=-1)
        pts.flags.writeable = False
        return pts

    @cached_property
    def radius(self) -> np.ndarray:
        """``|x|`` at every sample point."""
        r = np.sqrt(sum(c * c for c in self.coords))
        r.flags.writeable = False
        return r

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.box, tuple(c * factor for c in self.points_per_axis))

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """Evaluate ``func`` on the points array (last axis = coordinates)."""
        return GridFunction(self, np.asarray(func(self.points), dtype=float))

    def to_dict(self) -> dict:
        return {**self.box.to_dict(), "n": self.n, "points_per_axis": list(self.points_per_axis)}


class GridFunction:
    """Real scalar or vector field sampled on a :class:`Grid`.

    Scalar data has shape ``grid.shape``; vector data has shape
    ``(n,) + grid.shape``.  The stored array is read-only.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.array(values, dtype=float, copy=True)
        if values.shape == grid.shape:
            pass
        elif values.shape == (grid.n,) + grid.shape:
            pass
        elif values.ndim == 1 and values.size == grid.size:
            values = values.reshape(grid.shape)
        else:
            raise ValueError(f"values of shape {values.shape} do not fit grid of shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @property
    def codomain_dim(self) -> int:
        return 1 if self.values.shape == self.grid.shape else self.grid.n

    @property
    def is_scalar(self) -> bool:
        return self.codomain_dim == 1 and self.values.shape == self.grid.shape

    def magnitude(self) -> np.ndarray:
        """Pointwise absolute value (Euclidean length for vector fields)."""
        if self.is_scalar:
            return np.abs(self.values)
        return np.sqrt(np.sum(self.values**2, axis=0))

    def _binary(self, other, op) -> "GridFunction":
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid functions live on different grids")
            other = other.values
        return GridFunction(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __repr__(self) -> str:
        return f"GridFunction(shape={self.values.shape}, box={self.grid.box.to_dict()})"


def make_grid(box: Box, points_per_axis: Sequence[int] | int) -> Grid:
    """Cell-centred grid on ``box``; a single integer is used on every axis."""
    if np.isscalar(points_per_axis):
        points_per_axis = (int(points_per_axis),) * box.n
    counts = tuple(int(c) for c in points_per_axis)
    if len(counts) != box.n:
        raise ValueError(f"expected {box.n} axis counts, got {len(counts)}")
    if any(c <= 0 for c in counts):
        raise ValueError(f"axis counts must be positive, got {counts}")
    if any(c < 2 for c in counts):
        raise ValueError(f"need at least 2 points per axis, got {counts}")
    return Grid(box, counts)


def integrate(f: GridFunction | np.ndarray, grid: Grid | None = None) -> float:
    """Midpoint rule ``sum_j f(x_j) * prod(h)``.

    Accepts a scalar :class:`GridFunction`, or a raw array together with its grid.
    """
    if isinstance(f, GridFunction):
        if not f.is_scalar:
            raise ValueError("integrate expects a scalar grid function")
        values, grid = f.values, f.grid
    else:
        if grid is None:
            raise ValueError("a grid is required when integrating a raw array")
        values = np.asarray(f, dtype=float)
    # np.sum uses a fixed pairwise order, so repeated runs are bit-identical
    return float(np.sum(values) * grid.cell_volume)


def gradient(f: GridFunction) -> GridFunction:
    """Second-order finite-difference gradient.

    Central differences in the interior, one-sided second-order stencils on
    the two boundary layers of each axis.
    """
    if not f.is_scalar:
        raise ValueError("gradient expects a scalar grid function")
    if any(c < 3 for c in f.grid.shape):
        raise ValueError(f"gradient stencil needs >= 3 points per axis, grid has {f.grid.shape}")
    h = f.grid.spacing
    parts = np.gradient(f.values, *h, edge_order=2)
    if f.grid.n == 1:
        parts = [parts]
    return GridFunction(f.grid, np.stack(parts, axis=0))


def _header(f: GridFunction, fmt: str) -> dict:
    g = f.grid
    return {
        "n": g.n,
        "lower": list(g.box.lower),
        "upper": list(g.box.upper),
        "points_per_axis": list(g.shape),
        "codomain_dim": f.codomain_dim,
        "format": fmt,
    }


def save_grid_function(f: GridFunction, path: str | Path, fmt: str = "csv") -> None:
    """Write ``f`` as one JSON header line followed by the data.

    Points are in row-major order (axis 0 slowest).  ``csv`` writes one point
    per line with ``codomain_dim`` comma-separated columns; ``binary`` appends
    little-endian float64 values in the same order.
    """
    if fmt not in ("csv", "binary"):
        raise ValueError(f"unknown format {fmt!r}")
    flat = f.values.reshape(f.grid.size, 1) if f.is_scalar else f.values.reshape(f.grid.n, -1).T
    header = json.dumps(_header(f, fmt), sort_keys=True)
    path = Path(path)
    if fmt == "csv":
        lines = [header]
        lines.extend(",".join(repr(float(v)) for v in row) for row in flat)
        path.write_text("\n".join(lines) + "\n")
    else:
        with path.open("wb") as fh:
            fh.write(header.encode() + b"\n")
            fh.write(np.ascontiguousarray(flat, dtype="<f8").tobytes())


def load_grid_function(path: str | Path) -> GridFunction:
    raw = Path(path).read_bytes()
    head, _, body = raw.partition(b"\n")
    meta = json.loads(head)
    for key in ("n", "lower", "upper", "points_per_axis", "codomain_dim"):
        if key not in meta:
            raise ValueError(f"grid function header missing {key!r}")
    grid = Grid(Box(tuple(meta["lower"]), tuple(meta["upper"])), tuple(meta["points_per_axis"]))
    dim = int(meta["codomain_dim"])
    if meta.get("format", "csv") == "binary":
        flat = np.frombuffer(body, dtype="<f8").reshape(grid.size, dim)
    else:
        flat = np.loadtxt(body.decode().splitlines(), delimiter=",", ndmin=2)
    if flat.shape != (grid.size, dim):
        raise ValueError(f"expected {grid.size}x{dim} values, found {flat.shape}")
    if dim == 1:
        return GridFunction(grid, flat[:, 0].reshape(grid.shape))
    return GridFunction(grid, flat.T.reshape((dim,) + grid.shape))


def ball_volume(n: int, radius: float = 1.0) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius**n


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} (2 when n = 1)."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)
