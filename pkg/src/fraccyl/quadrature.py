"""Quadrature rules for the singular kernel |x - y|^(-N - sp).

Cell pairs are addressed by their integer offset.  A one-dimensional rule for
offset ``d`` stores, per point, the local coordinates of x in cell ``c`` and
of y in cell ``c + d``, a kernel-free weight ``nu`` and the distance ``r``, so
that ``sum nu * r**(-1 - sp) * G`` approximates the pair integral of ``G``
against the 1D kernel.  The cylinder rule is the product of such a transverse
rule with an axial rule whose weights integrate the 2D kernel in ``x1``
exactly, which makes the 2D energy of an ``x1``-independent function reduce
to the 1D energy times ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import betainc, beta as beta_fn, roots_jacobi

__all__ = [
    "QuadratureSpec",
    "gauss_legendre",
    "gauss_jacobi",
    "discrete_gauss",
    "PairRule",
    "transverse_rule",
    "exterior_rule_1d",
    "axial_near_rule",
    "axial_weight",
    "axial_tail_weight",
    "kernel_line_integral",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Knobs of the pair quadrature.

    near_split   node count of the Jacobi/generalized Gauss rules on touching
                 cell pairs
    far_order    Gauss points per axis on separated pairs
    tail_radius  radius used by the analytic tail cross-check; ``None`` picks
                 ``max(8, 2 * diameter)``
    pair_cutoff  center distance beyond which a cell pair is collapsed to one
                 point with the exact pair weight; ``None`` means ``8 h``
    """

    near_split: int = 4
    far_order: int = 3
    tail_radius: float | None = None
    pair_cutoff: float | None = None

    def __post_init__(self):
        if int(self.near_split) != self.near_split or self.near_split < 2:
            raise ValueError("near_split must be an integer >= 2")
        if int(self.far_order) != self.far_order or self.far_order < 2:
            raise ValueError("far_order must be an integer >= 2")
        if self.tail_radius is not None and not self.tail_radius > 0:
            raise ValueError("tail_radius must be positive")
        if self.pair_cutoff is not None and not self.pair_cutoff > 0:
            raise ValueError("pair_cutoff must be positive")

    def radius(self, diameter: float) -> float:
        r = max(8.0, 2.0 * diameter) if self.tail_radius is None else float(self.tail_radius)
        if r < diameter:
            raise ValueError(f"tail_radius {r} is smaller than the domain diameter {diameter}")
        return r

    def cutoff_cells(self, h: float) -> int:
        """Largest offset (in cells) that still gets the full far rule."""
        cut = 8.0 * h if self.pair_cutoff is None else float(self.pair_cutoff)
        return max(2, int(math.floor(cut / h + 1e-9)))


@lru_cache(maxsize=None)
def _leggauss01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_legendre(n: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    t, w = _leggauss01(int(n))
    return t.copy(), w.copy()


@lru_cache(maxsize=None)
def _jacobi01(n: int, a: float, b: float):
    x, w = roots_jacobi(n, a, b)
    return 0.5 * (x + 1.0), w * 2.0 ** (-(a + b + 1.0))


def gauss_jacobi(n: int, a: float, b: float):
    """Gauss rule on [0, 1] for the weight ``(1 - t)^a t^b``."""
    t, w = _jacobi01(int(n), float(a), float(b))
    return t.copy(), w.copy()


def discrete_gauss(x: np.ndarray, w: np.ndarray, n: int):
    """n-point Gauss rule of a positive discrete measure (Stieltjes + Golub-Welsch)."""
    lo, hi = x.min(), x.max()
    span = hi - lo if hi > lo else 1.0
    y = (x - lo) / span
    mu0 = w.sum()
    alpha = np.empty(n)
    b = np.zeros(n)
    # orthonormal three-term recurrence against the discrete measure
    q_prev = np.zeros_like(y)
    q_cur = np.full_like(y, 1.0 / math.sqrt(mu0))
    for k in range(n):
        alpha[k] = np.dot(w, y * q_cur * q_cur)
        if k == n - 1:
            break
        nxt = (y - alpha[k]) * q_cur - b[k] * q_prev
        b[k + 1] = math.sqrt(np.dot(w, nxt * nxt))
        q_prev, q_cur = q_cur, nxt / b[k + 1]
    nodes, vecs = eigh_tridiagonal(alpha, b[1:])
    weights = mu0 * vecs[0] ** 2
    return lo + span * nodes, weights


# ---------------------------------------------------------------------------
# one-dimensional pair rules


@dataclass(frozen=True)
class PairRule:
    """Points of one cell-offset rule (local coordinates in [0, 1])."""

    xi_x: np.ndarray
    xi_y: np.ndarray
    nu: np.ndarray
    r: np.ndarray

    def weights(self, sigma: float) -> np.ndarray:
        return self.nu * self.r ** (-1.0 - sigma)

    def swapped(self) -> "PairRule":
        return PairRule(self.xi_y, self.xi_x, self.nu, self.r)


def kernel_line_integral(d: int, h: float, sigma: float) -> float:
    """Exact ``int_cell int_cell' |x - y|^(-1 - sigma)`` for cells ``d >= 2`` apart."""
    def phi(z):
        return z ** (1.0 - sigma) / ((1.0 - sigma) * (-sigma)) if sigma != 1.0 else -math.log(z)

    return phi((d + 1) * h) - 2.0 * phi(d * h) + phi((d - 1) * h)


def transverse_rule(d: int, h: float, s: float, p: float, quad: QuadratureSpec) -> PairRule:
    """Rule for the pairs (cell c, cell c + d), ``d >= 0``.

    Offset 0 only carries the ordering ``x > y`` and doubles the weights.
    """
    if d < 0:
        raise ValueError("transverse_rule expects a non-negative offset")
    sigma = s * p
    beta = p - 1.0 - sigma
    n_z = quad.near_split
    xi_i, w_i = gauss_legendre(2)
    if d == 0:
        t, lam = gauss_jacobi(n_z, 1.0, beta)
        T, Q = np.meshgrid(t, xi_i, indexing="ij")
        L, W = np.meshgrid(lam, w_i, indexing="ij")
        eta = (1.0 - T) * Q
        nu = 2.0 * h * h * L * W * T ** (-beta)
        return PairRule((eta + T).ravel(), eta.ravel(), nu.ravel(), (h * T).ravel())
    if d == 1:
        # piece A: |x - y| < h, both points near the shared node
        t, lam = gauss_jacobi(n_z, 0.0, beta + 1.0)
        T, Q = np.meshgrid(t, xi_i, indexing="ij")
        L, W = np.meshgrid(lam, w_i, indexing="ij")
        xa = 1.0 - T * (1.0 - Q)
        ya = T * Q
        nua = h * h * L * W * T ** (-beta)
        ra = h * T
        # piece B: h < |x - y| < 2h
        t, lam = gauss_jacobi(n_z, 1.0, 0.0)
        T, Q = np.meshgrid(t, xi_i, indexing="ij")
        L, W = np.meshgrid(lam, w_i, indexing="ij")
        xb = (1.0 - T) * Q
        yb = T + (1.0 - T) * Q
        nub = h * h * L * W
        rb = h * (1.0 + T)
        return PairRule(np.concatenate([xa.ravel(), xb.ravel()]),
                        np.concatenate([ya.ravel(), yb.ravel()]),
                        np.concatenate([nua.ravel(), nub.ravel()]),
                        np.concatenate([ra.ravel(), rb.ravel()]))
    if d <= quad.cutoff_cells(h):
        xi, w = gauss_legendre(quad.far_order)
        X, Y = np.meshgrid(xi, xi, indexing="ij")
        WX, WY = np.meshgrid(w, w, indexing="ij")
        return PairRule(X.ravel(), Y.ravel(), (h * h * WX * WY).ravel(),
                        (h * (d + Y - X)).ravel())
    r = d * h
    nu = kernel_line_integral(d, h, sigma) * r ** (1.0 + sigma)
    return PairRule(np.array([0.5]), np.array([0.5]), np.array([nu]), np.array([r]))


def exterior_kappa(X, lo: float, hi: float, sigma: float):
    """``int_{R minus (lo, hi)} |X - Y|^(-1 - sigma) dY``."""
    return ((X - lo) ** (-sigma) + (hi - X) ** (-sigma)) / sigma


def exterior_rule_1d(n: int, h: float, lo: float, s: float, p: float, quad: QuadratureSpec):
    """Per-cell rule for ``int_omega |w|^p kappa``; returns (xi[n, q], w[n, q]).

    The two boundary cells use Gauss-Jacobi with weight ``t^(p - sp)`` in the
    distance to the boundary, absorbing the vanishing of ``|w|^p`` there.
    """
    sigma = s * p
    hi = lo + n * h
    nq = max(quad.near_split, quad.far_order + 1)
    xi = np.empty((n, nq))
    wt = np.empty((n, nq))
    g, gw = gauss_legendre(nq)
    for c in range(1, n - 1):
        X = lo + h * (c + g)
        xi[c] = g
        wt[c] = h * gw * exterior_kappa(X, lo, hi, sigma)
    t, lam = gauss_jacobi(nq, 0.0, p - sigma)
    base = h * lam * t ** (-(p - sigma))
    xi[0] = t
    wt[0] = base * exterior_kappa(lo + h * t, lo, hi, sigma)
    xi[n - 1] = 1.0 - t
    wt[n - 1] = base * exterior_kappa(hi - h * t, lo, hi, sigma)
    return xi, wt


# ---------------------------------------------------------------------------
# axial rules for the cylinder (2D kernel integrated along x1)


def _graded_nodes(a: float, b: float, focus: float, scale: float, order: int = 16):
    """Composite Gauss nodes on [a, b], panels doubling away from ``focus``."""
    edges = {a, b}
    step = scale / 8.0
    while step < (b - a):
        for e in (focus - step, focus + step):
            if a < e < b:
                edges.add(e)
        step *= 2.0
    edges = np.array(sorted(edges))
    t, w = gauss_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    return (lo + (hi - lo) * t).ravel(), ((hi - lo) * w).ravel()


def _k2(z, r, alpha):
    return (r * r + z * z) ** (-alpha)


def kernel_tail(z: float, r: float, alpha: float) -> float:
    """Closed form of ``int_z^inf (r^2 + t^2)^(-alpha) dt`` for ``z >= 0``."""
    a = alpha - 0.5
    x = r * r / (r * r + z * z)
    return r ** (1.0 - 2.0 * alpha) * 0.5 * beta_fn(a, 0.5) * betainc(a, 0.5, x)


def axial_weight(d1: int, r: float, h1: float, alpha: float) -> float:
    """``int tent_d1(z) (r^2 + z^2)^(-alpha) dz`` for ``|d1| >= 1`` (smooth integrand)."""
    d1 = abs(d1)
    t, w = gauss_legendre(12)
    z1 = (d1 - 1 + t) * h1
    z2 = (d1 + t) * h1
    return h1 * float(np.dot(w, t * h1 * _k2(z1, r, alpha)) +
                      np.dot(w, (1.0 - t) * h1 * _k2(z2, r, alpha)))


def axial_tail_weight(D: int, r: float, h1: float, alpha: float) -> float:
    """``sum_{d1 >= D} axial_weight(d1, r)`` in closed form, ``D >= 2``."""
    t, w = gauss_legendre(12)
    z = (D - 1 + t) * h1
    ramp = h1 * h1 * float(np.dot(w, t * _k2(z, r, alpha)))
    return ramp + h1 * kernel_tail(D * h1, r, alpha)


def axial_near_rule(d1: int, r: float, h1: float, alpha: float, n_g: int):
    """Axial points for offsets ``d1`` in {0, 1} at transverse distance ``r``.

    Returns ``(xi_x, xi_y, w)`` with ``w`` including the kernel; the weights
    sum to the exact tent moment of ``(r^2 + z^2)^(-alpha)``.
    """
    xi_i, w_i = gauss_legendre(2)
    xs, ys, ws = [], [], []

    def piece(a, b, tent, focus):
        z, wz = _graded_nodes(a, b, focus, r)
        zq, wq = discrete_gauss(z, wz * tent(z) * _k2(z, r, alpha), n_g)
        return zq / h1, wq

    if d1 == 0:
        tau, wq = piece(0.0, h1, lambda z: h1 - z, 0.0)
        for sgn in (1.0, -1.0):
            for q in range(n_g):
                for i in range(2):
                    base = (1.0 - tau[q]) * xi_i[i]
                    if sgn > 0:
                        xs.append(base); ys.append(base + tau[q])
                    else:
                        ys.append(base); xs.append(base + tau[q])
                    ws.append(wq[q] * w_i[i])
    elif d1 == 1:
        tau, wq = piece(0.0, h1, lambda z: z, 0.0)
        for q in range(n_g):
            for i in range(2):
                xs.append(1.0 - tau[q] * (1.0 - xi_i[i]))
                ys.append(tau[q] * xi_i[i])
                ws.append(wq[q] * w_i[i])
        tau, wq = piece(h1, 2.0 * h1, lambda z: 2.0 * h1 - z, h1)
        for q in range(n_g):
            for i in range(2):
                x = (2.0 - tau[q]) * xi_i[i]
                xs.append(x)
                ys.append(x + tau[q] - 1.0)
                ws.append(wq[q] * w_i[i])
    else:
        raise ValueError("axial_near_rule handles offsets 0 and 1 only")
    return np.array(xs), np.array(ys), np.array(ws)
