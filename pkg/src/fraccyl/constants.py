"""Special-function constants of the fractional p-Laplacian kernel.

The kernel constant is

    C(N, s, p) = s p 2^(2s-1) Gamma((N + p s)/2)
                 / (2 pi^((N-1)/2) Gamma(1 - s) Gamma((p + 1)/2))

and the axial fiber integral ``theta(N, p) = int_R (1 + z^2)^(-(N + s p)/2) dz``
links consecutive dimensions through ``C(N) * theta(N) = C(N - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import QuadratureSpec, gauss_legendre

__all__ = [
    "FractionalParams",
    "gamma",
    "c_nsp",
    "theta_np",
    "theta_quadrature",
    "reduction_residual",
    "scaled_fiber_integral",
]

# Lanczos approximation, g = 7, n = 9 (Godfrey's coefficients).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gamma(x: float) -> float:
    """Gamma function on the positive half-line.

    Arguments below 1/2 are shifted up with ``Gamma(x) = Gamma(x + 1) / x``
    so the Lanczos sum is only evaluated where it is accurate.
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError(f"gamma is defined here for finite x > 0, got {x!r}")
    if x < 0.5:
        return gamma(x + 1.0) / x
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for k in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[k] / (x + k)
    t = x + _LANCZOS_G + 0.5
    # split the power to keep t**(x + 0.5) from overflowing before exp(-t)
    half = t ** (0.5 * (x + 0.5))
    return _SQRT_2PI * half * math.exp(-t) * half * acc


def _check_params(dim: int, s: float, p: float) -> None:
    if int(dim) != dim or dim < 1:
        raise ValueError(f"dimension must be a positive integer, got {dim!r}")
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0, 1), got {s!r}")
    if not (p >= 2.0) or not math.isfinite(p):
        raise ValueError(f"p must be >= 2, got {p!r}")


def c_nsp(dim: int, s: float, p: float) -> float:
    """Normalising constant of the fractional p-Laplacian in dimension ``dim``."""
    _check_params(dim, s, p)
    num = s * p * 2.0 ** (2.0 * s - 1.0) * gamma(0.5 * (dim + p * s))
    den = 2.0 * math.pi ** (0.5 * (dim - 1)) * gamma(1.0 - s) * gamma(0.5 * (p + 1.0))
    return num / den


def theta_np(dim: int, s: float, p: float) -> float:
    """Closed form of ``int_R (1 + z^2)^(-(dim + s p)/2) dz``."""
    _check_params(dim, s, p)
    e = dim + s * p
    return math.sqrt(math.pi) * gamma(0.5 * (e - 1.0)) / gamma(0.5 * e)


def reduction_residual(dim: int, s: float, p: float) -> float:
    """``|C(dim) theta(dim) - C(dim - 1)|``; zero up to rounding."""
    if dim < 2:
        raise ValueError("the reduction identity needs dim >= 2")
    return abs(c_nsp(dim, s, p) * theta_np(dim, s, p) - c_nsp(dim - 1, s, p))


@dataclass(frozen=True)
class FractionalParams:
    """Dimension and exponents of the problem with the cached kernel constant.

    Instances are immutable; build a new one to change any field.
    """

    dim: int
    s: float
    p: float
    c_kernel: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_params(self.dim, self.s, self.p)
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "c_kernel", c_nsp(self.dim, self.s, self.p))

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def sp(self) -> float:
        return self.s * self.p

    def with_dim(self, dim: int) -> "FractionalParams":
        return FractionalParams(dim, self.s, self.p)


def _truncation_radius(gexp: float, tol: float = 1e-10) -> float:
    # int_Z^inf z^(-gexp) dz = Z^(1 - gexp) / (gexp - 1) < tol
    z = (tol * (gexp - 1.0)) ** (-1.0 / (gexp - 1.0))
    return float(min(max(z, 8.0), 1e12))


def _graded_panels(center: float, scale: float, zmax: float) -> np.ndarray:
    """Panel breakpoints symmetric about ``center``, doubling outwards."""
    right = [0.0, 0.5, 1.0]
    while right[-1] < zmax:
        right.append(min(2.0 * right[-1], zmax))
    right = np.asarray(right)
    return center + scale * np.concatenate([-right[:0:-1], right])


def _fiber_quadrature(a: float, x: float, gexp: float, order: int) -> float:
    zmax = _truncation_radius(gexp)
    edges = _graded_panels(x, a, zmax)
    t, w = gauss_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    z = lo + (hi - lo) * t[None, :]
    vals = (1.0 + ((x - z) / a) ** 2) ** (-0.5 * gexp)
    body = float(np.sum((hi - lo) * w[None, :] * vals))
    # leading-order tail beyond |z - x| = a * zmax on both sides
    tail = 2.0 * a * zmax ** (1.0 - gexp) / (gexp - 1.0)
    return body + tail


def theta_quadrature(dim: int, s: float, p: float, order: int = 12) -> float:
    """Composite Gauss-Legendre evaluation of the fiber integral."""
    _check_params(dim, s, p)
    return _fiber_quadrature(1.0, 0.0, dim + s * p, order)


def scaled_fiber_integral(a: float, x: float, dim: int, s: float, p: float,
                          quad: QuadratureSpec | None = None) -> float:
    """Quadrature of ``int_R (1 + (x - z)^2 / a^2)^(-(dim + s p)/2) dz``.

    Equals ``a * theta_np(dim, s, p)`` for every ``x``.
    """
    if not (a > 0.0) or not math.isfinite(a):
        raise ValueError(f"scale a must be positive, got {a!r}")
    _check_params(dim, s, p)
    order = 12 if quad is None else max(12, 2 * quad.far_order)
    return _fiber_quadrature(float(a), float(x), dim + s * p, order)
