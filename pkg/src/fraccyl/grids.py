"""Uniform grids on an interval and on the cylinder (-ell, ell) x (lo, hi).

Functions are piecewise linear (1D) or bilinear (2D) in the nodal values and
vanish identically outside the open domain.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .quadrature import gauss_legendre

__all__ = [
    "ConfigurationError",
    "CrossSectionGrid",
    "CylinderGrid",
    "DiscreteFunction",
    "Window",
    "ForcingSpec",
    "make_cross_section_grid",
    "make_cylinder_grid",
    "lp_norm",
    "extend_cross_section",
    "sample_forcing",
    "mass_matrix",
    "read_csv",
]

LP_ORDER = 3  # Gauss points per axis and cell for L^p norms and loads


class ConfigurationError(ValueError):
    """Invalid grid or option combination."""


def _cells(length: float, h: float, what: str) -> int:
    if not (h > 0) or not math.isfinite(h):
        raise ConfigurationError(f"{what} spacing must be positive, got {h!r}")
    ratio = length / h
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-12 * max(1.0, ratio):
        raise ConfigurationError(f"{what} spacing {h} does not divide the length {length}")
    return n


@dataclass(frozen=True)
class CrossSectionGrid:
    lo: float
    hi: float
    h: float
    n: int = field(init=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError(f"need lo < hi, got ({self.lo}, {self.hi})")
        object.__setattr__(self, "n", _cells(self.hi - self.lo, self.h, "cross-section"))

    @property
    def dim(self) -> int:
        return 1

    @property
    def shape(self):
        return (self.n + 1,)

    @property
    def nodes(self) -> np.ndarray:
        return self.lo + self.h * np.arange(self.n + 1)

    @property
    def n_dofs(self) -> int:
        return self.n - 1

    @property
    def diameter(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class CylinderGrid:
    ell: float
    cross: CrossSectionGrid
    h1: float
    n1: int = field(init=False)

    def __post_init__(self):
        if not self.ell > 0:
            raise ConfigurationError(f"ell must be positive, got {self.ell!r}")
        object.__setattr__(self, "n1", _cells(2.0 * self.ell, self.h1, "axial"))

    @property
    def dim(self) -> int:
        return 2

    @property
    def shape(self):
        return (self.n1 + 1, self.cross.n + 1)

    @property
    def axial_nodes(self) -> np.ndarray:
        return -self.ell + self.h1 * np.arange(self.n1 + 1)

    @property
    def n_dofs(self) -> int:
        return (self.n1 - 1) * (self.cross.n - 1)

    @property
    def diameter(self) -> float:
        return math.hypot(2.0 * self.ell, self.cross.diameter)


def make_cross_section_grid(lo: float, hi: float, h: float) -> CrossSectionGrid:
    grid = CrossSectionGrid(float(lo), float(hi), float(h))
    if grid.n < 2:
        raise ConfigurationError("the cross-section needs at least one interior node")
    return grid


def make_cylinder_grid(ell: float, cross: CrossSectionGrid, h1: float) -> CylinderGrid:
    grid = CylinderGrid(float(ell), cross, float(h1))
    if grid.n1 < 2:
        raise ConfigurationError("the cylinder needs at least one interior axial node")
    return grid


@dataclass(frozen=True)
class Window:
    """Sub-cylinder (-ell0, ell0) x omega."""

    ell0: float

    def __post_init__(self):
        if not self.ell0 > 0:
            raise ConfigurationError("window half-length must be positive")


class DiscreteFunction:
    """Nodal values on a grid; read-only once built.

    With ``dirichlet=True`` (the default) boundary nodes are pinned to zero.
    Data such as forcing terms use ``dirichlet=False`` and keep their
    boundary values; either way the function is zero outside the domain.
    """

    __slots__ = ("grid", "values", "dirichlet")

    def __init__(self, grid, values, dirichlet: bool = True):
        vals = np.array(values, dtype=float, copy=True)
        if vals.shape != grid.shape:
            raise ValueError(f"values of shape {vals.shape} do not fit grid shape {grid.shape}")
        if dirichlet:
            if grid.dim == 1:
                vals[0] = vals[-1] = 0.0
            else:
                vals[0, :] = vals[-1, :] = 0.0
                vals[:, 0] = vals[:, -1] = 0.0
        vals.flags.writeable = False
        self.grid = grid
        self.values = vals
        self.dirichlet = bool(dirichlet)

    def __repr__(self):
        return f"DiscreteFunction({self.grid!r}, max|u|={np.abs(self.values).max():.3g})"

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_dofs(cls, grid, dofs):
        vals = np.zeros(grid.shape)
        if grid.dim == 1:
            vals[1:-1] = dofs
        else:
            vals[1:-1, 1:-1] = np.reshape(dofs, (grid.n1 - 1, grid.cross.n - 1))
        return cls(grid, vals)

    def dofs(self) -> np.ndarray:
        if self.grid.dim == 1:
            return self.values[1:-1].copy()
        return self.values[1:-1, 1:-1].ravel()

    def _combine(self, other, op):
        if isinstance(other, DiscreteFunction):
            if other.grid != self.grid:
                raise ValueError("functions live on different grids")
            return DiscreteFunction(self.grid, op(self.values, other.values),
                                    self.dirichlet and other.dirichlet)
        return DiscreteFunction(self.grid, op(self.values, float(other)), self.dirichlet)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        return DiscreteFunction(self.grid, self.values * float(c), self.dirichlet)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __call__(self, *coords):
        """Evaluate at points; 1D takes ``x2``, 2D takes ``(x1, x2)``."""
        g = self.grid
        if g.dim == 1:
            return _interp1(self.values, g.lo, g.h, g.n, np.asarray(coords[0], dtype=float))
        x1 = np.asarray(coords[0], dtype=float)
        x2 = np.asarray(coords[1], dtype=float)
        x1, x2 = np.broadcast_arrays(x1, x2)
        c = g.cross
        i1, t1, in1 = _locate(x1, -g.ell, g.h1, g.n1)
        i2, t2, in2 = _locate(x2, c.lo, c.h, c.n)
        v = self.values
        out = ((1 - t1) * (1 - t2) * v[i1, i2] + t1 * (1 - t2) * v[i1 + 1, i2]
               + (1 - t1) * t2 * v[i1, i2 + 1] + t1 * t2 * v[i1 + 1, i2 + 1])
        return np.where(in1 & in2, out, 0.0)

    # -- serialization -------------------------------------------------
    def to_csv(self, path=None) -> str:
        g = self.grid
        buf = io.StringIO()
        if g.dim == 1:
            buf.write("x2,value\n")
            for x, v in zip(g.nodes, self.values):
                buf.write(f"{x!r},{v!r}\n")
        else:
            buf.write("x1,x2,value\n")
            x2 = g.cross.nodes
            for i, x1 in enumerate(g.axial_nodes):
                for j in range(len(x2)):
                    buf.write(f"{float(x1)!r},{float(x2[j])!r},{float(self.values[i, j])!r}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def read_csv(path, grid, dirichlet: bool = True) -> DiscreteFunction:
    """Read a function written by ``DiscreteFunction.to_csv``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    vals = data[:, -1].reshape(grid.shape)
    return DiscreteFunction(grid, vals, dirichlet)


def _locate(x, lo, h, n):
    s = (x - lo) / h
    inside = (s > 0.0) & (s < n)
    i = np.clip(np.floor(s).astype(np.int64), 0, n - 1)
    return i, np.clip(s - i, 0.0, 1.0), inside


def _interp1(vals, lo, h, n, x):
    i, t, inside = _locate(x, lo, h, n)
    return np.where(inside, (1 - t) * vals[i] + t * vals[i + 1], 0.0)


# ---------------------------------------------------------------------------
# cell quadrature


def _segment_points(lo, h, n, a, b, order):
    """Gauss points of the cells of [lo, lo + n h] clipped to [a, b]."""
    g, w = gauss_legendre(order)
    idx, loc, wts = [], [], []
    for c in range(n):
        c0, c1 = lo + c * h, lo + (c + 1) * h
        x0, x1 = max(c0, a), min(c1, b)
        if x1 - x0 <= 1e-14 * h:
            continue
        t0, t1 = (x0 - c0) / h, (x1 - c0) / h
        idx.append(np.full(order, c))
        loc.append(t0 + (t1 - t0) * g)
        wts.append((x1 - x0) * w)
    return np.concatenate(idx), np.concatenate(loc), np.concatenate(wts)


def _basis_1d(idx, loc, n_nodes):
    rows = np.arange(len(idx))
    return sp.csr_matrix(
        (np.concatenate([1.0 - loc, loc]), (np.concatenate([rows, rows]),
                                            np.concatenate([idx, idx + 1]))),
        shape=(len(idx), n_nodes))


@lru_cache(maxsize=64)
def cell_quadrature(grid, ell0=None, order=LP_ORDER):
    """Sparse evaluation matrix ``B`` (points x nodes) and weights ``w``."""
    if grid.dim == 1:
        idx, loc, w = _segment_points(grid.lo, grid.h, grid.n, grid.lo, grid.hi, order)
        return _basis_1d(idx, loc, grid.n + 1).tocsr(), w
    c = grid.cross
    a = -grid.ell if ell0 is None else -ell0
    b = grid.ell if ell0 is None else ell0
    i1, l1, w1 = _segment_points(-grid.ell, grid.h1, grid.n1, a, b, order)
    i2, l2, w2 = _segment_points(c.lo, c.h, c.n, c.lo, c.hi, order)
    B1 = _basis_1d(i1, l1, grid.n1 + 1)
    B2 = _basis_1d(i2, l2, c.n + 1)
    B = sp.kron(B1, B2, format="csr")
    return B, np.kron(w1, w2)


@lru_cache(maxsize=64)
def mass_matrix(grid):
    """Consistent mass matrix over all nodes (exact for products of P1/Q1 functions)."""
    B, w = cell_quadrature(grid)
    return (B.T @ sp.diags(w) @ B).tocsr()


def lp_norm(u: DiscreteFunction, window: Window | None = None, p: float = 2.0) -> float:
    """``(int_window |u|^p)^(1/p)`` by 3-point Gauss per cell (cells clipped to the window)."""
    if p < 1:
        raise ValueError("lp_norm needs p >= 1")
    g = u.grid
    ell0 = None
    if window is not None:
        if g.dim == 1:
            raise ValueError("windows apply to cylinder grids only")
        if window.ell0 > g.ell * (1 + 1e-12):
            raise ValueError(f"window ell0={window.ell0} exceeds the cylinder half-length {g.ell}")
        ell0 = min(float(window.ell0), g.ell)
    B, w = cell_quadrature(g, ell0)
    vals = B @ u.values.ravel()
    return float(np.dot(w, np.abs(vals) ** p)) ** (1.0 / p)


def extend_cross_section(u_inf: DiscreteFunction, grid: CylinderGrid) -> DiscreteFunction:
    """Copy a cross-section function onto every interior axial node line."""
    if u_inf.grid != grid.cross:
        raise ValueError("cross-section of the function and of the cylinder differ")
    vals = np.zeros(grid.shape)
    vals[:, :] = u_inf.values[None, :]
    if u_inf.dirichlet:
        return DiscreteFunction(grid, vals)
    return DiscreteFunction(grid, vals, dirichlet=False)


# ---------------------------------------------------------------------------
# forcing and initial data


@dataclass(frozen=True)
class ForcingSpec:
    """Source terms depending on the cross-section variable (and time).

    kind      "constant" (value), "bump" (value * (1 - |(x2 - center)/radius|^2)_+^2)
              or "table" (nodal values on the cross-section grid)
    growth    time profile ``1 + growth * t``; 0 gives a steady source
    """

    kind: str = "constant"
    value: float = 1.0
    radius: float = 1.0
    center: float = 0.0
    table: tuple = ()
    growth: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "bump", "table"):
            raise ConfigurationError(f"unknown forcing family {self.kind!r}")
        if self.kind == "bump" and not self.radius > 0:
            raise ConfigurationError("bump radius must be positive")
        object.__setattr__(self, "table", tuple(float(v) for v in self.table))

    def profile(self, x2: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(x2, self.value, dtype=float)
        if self.kind == "bump":
            q = np.clip(1.0 - ((x2 - self.center) / self.radius) ** 2, 0.0, None)
            return self.value * q * q
        table = np.asarray(self.table)
        if table.shape != x2.shape:
            raise ConfigurationError(
                f"table has {table.size} values but the cross-section has {x2.size} nodes")
        return table.copy()


def sample_forcing(spec: ForcingSpec, grid, t: float | None = None,
                   dirichlet: bool = False) -> DiscreteFunction:
    """Nodal samples of ``f(x2)`` (times the time profile), constant in ``x1``.

    Sources keep their boundary values; pass ``dirichlet=True`` to sample
    initial data that must vanish on the boundary.
    """
    cross = grid if grid.dim == 1 else grid.cross
    prof = spec.profile(cross.nodes)
    if t is not None and spec.growth:
        prof = prof * (1.0 + spec.growth * t)
    vals = prof if grid.dim == 1 else np.broadcast_to(prof, grid.shape)
    return DiscreteFunction(grid, vals, dirichlet)
