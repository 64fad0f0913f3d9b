"""Gagliardo p-energy of grid functions, its gradient and the exterior tail.

The seminorm of a zero-extended function splits into the pair integral over
the domain plus twice the domain-exterior coupling.  Both parts are sums of
``w |linear form of the nodal values|^p`` with positive weights, so the
discrete energy is convex and its gradient is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .constants import FractionalParams, theta_np
from .grids import DiscreteFunction, mass_matrix
from .quadrature import (
    PairRule,
    QuadratureSpec,
    axial_near_rule,
    axial_tail_weight,
    axial_weight,
    exterior_kappa,
    exterior_rule_1d,
    gauss_legendre,
    transverse_rule,
)

__all__ = [
    "QuadratureSpec",
    "EnergyReport",
    "phi_p",
    "seminorm_p",
    "energy",
    "energy_gradient",
    "energy_report",
    "tail_integral",
    "exterior_kernel",
    "PairOperator",
    "pair_operator",
]


def phi_p(r, p: float):
    """``|r|^(p-2) r`` with ``phi_p(0) = 0``."""
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    out = np.zeros_like(r)
    nz = a > 0
    out[nz] = a[nz] ** (p - 2.0) * r[nz]
    return out if out.ndim else float(out)


def tail_integral(x, R: float, params: FractionalParams) -> float:
    """``int_{|y - x| > R} |x - y|^(-N - sp) dy``; independent of ``x``."""
    if not R > 0:
        raise ValueError(f"tail radius must be positive, got {R!r}")
    sphere = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}.get(params.dim)
    if sphere is None:
        n = params.dim
        sphere = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    return sphere * R ** (-params.sp) / params.sp


@dataclass(frozen=True)
class EnergyReport:
    seminorm_p: float
    interaction_part: float
    tail_part: float
    load: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def to_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in asdict(self).items())


class PairOperator:
    """Precomputed rule tables for one (grid, params, quad) triple."""

    def __init__(self, grid, params: FractionalParams, quad: QuadratureSpec):
        if grid.dim != params.dim:
            raise ValueError(f"grid dimension {grid.dim} differs from params.dim={params.dim}")
        self.grid = grid
        self.params = params
        self.quad = quad
        self.mode = K.pow_mode(params.p)
        if grid.dim == 1:
            self._build_1d()
        else:
            self._build_2d()

    # -- tables ----------------------------------------------------------
    def _build_1d(self):
        g, s, p, q = self.grid, self.params.s, self.params.p, self.quad
        sigma = s * p
        gd, starts, xx, yy, ww = [], [0], [], [], []
        for d in range(g.n):
            rule = transverse_rule(d, g.h, s, p, q)
            fac = 1.0 if d == 0 else 2.0
            gd.append(d)
            xx.append(rule.xi_x)
            yy.append(rule.xi_y)
            ww.append(fac * rule.weights(sigma))
            starts.append(starts[-1] + rule.nu.size)
        self.gd = np.array(gd, dtype=np.int64)
        self.gstart = np.array(starts, dtype=np.int64)
        self.xx = np.concatenate(xx)
        self.yy = np.concatenate(yy)
        self.w = np.concatenate(ww)
        ext_xi, ext_w = exterior_rule_1d(g.n, g.h, g.lo, s, p, q)
        self.ext_xi = np.ascontiguousarray(ext_xi)
        self.ext_w = np.ascontiguousarray(2.0 * ext_w)

    def _build_2d(self):
        g, s, p, q = self.grid, self.params.s, self.params.p, self.quad
        c = g.cross
        n1, n2, h1, h2 = g.n1, c.n, g.h1, c.h
        sigma = s * p
        alpha = 1.0 + 0.5 * sigma
        rules = [transverse_rule(d, h2, s, p, q) for d in range(n2)]
        near_cache = {}

        def near(d1, r):
            key = (d1, float(r))
            if key not in near_cache:
                near_cache[key] = axial_near_rule(d1, r, h1, alpha, q.near_split)
            return near_cache[key]

        gd1, gd2, starts = [], [], [0]
        ax, ay, tx, ty, ww = [], [], [], [], []

        def add(d1, d2, a_x, a_y, t_x, t_y, w):
            gd1.append(d1)
            gd2.append(d2)
            ax.append(a_x); ay.append(a_y); tx.append(t_x); ty.append(t_y); ww.append(w)
            starts.append(starts[-1] + len(w))

        # the offset-0 rule only keeps x2 > y2; with an axial offset the other
        # ordering is a different configuration and gets its own points
        r0 = rules[0]
        sym0 = PairRule(np.concatenate([r0.xi_x, r0.xi_y]), np.concatenate([r0.xi_y, r0.xi_x]),
                        0.5 * np.concatenate([r0.nu, r0.nu]), np.concatenate([r0.r, r0.r]))

        def oriented(d2, d1=1):
            if d2 == 0 and d1 != 0:
                return sym0
            rule = rules[abs(d2)]
            return rule if d2 >= 0 else rule.swapped()

        # axial offsets 0 and 1: product with the near axial rules
        for d1 in (0, 1):
            d2s = range(0, n2) if d1 == 0 else range(-(n2 - 1), n2)
            for d2 in d2s:
                rule = oriented(d2, d1)
                fac = 1.0 if (d1 == 0 and d2 == 0) else 2.0
                parts = [[], [], [], [], []]
                for m in range(rule.nu.size):
                    xa, ya, wa = near(d1, rule.r[m])
                    parts[0].append(xa)
                    parts[1].append(ya)
                    parts[2].append(np.full(xa.size, rule.xi_x[m]))
                    parts[3].append(np.full(xa.size, rule.xi_y[m]))
                    parts[4].append(fac * rule.nu[m] * wa)
                add(d1, d2, *(np.concatenate(x) for x in parts))
        # axial offsets >= 2: one point at the axial centers, exact axial weight
        alltr = {d2: oriented(d2) for d2 in range(-(n2 - 1), n2)}
        weight_cache = {}
        for d1 in range(2, n1 + 2):
            for d2 in range(-(n2 - 1), n2):
                rule = alltr[d2]
                wa = np.empty(rule.nu.size)
                for m in range(rule.nu.size):
                    key = (d1, float(rule.r[m]))
                    if key not in weight_cache:
                        weight_cache[key] = axial_weight(d1, rule.r[m], h1, alpha)
                    wa[m] = weight_cache[key]
                half = np.full(rule.nu.size, 0.5)
                add(d1, d2, half, half, rule.xi_x, rule.xi_y, 2.0 * rule.nu * wa)
        self.gd1 = np.array(gd1, dtype=np.int64)
        self.gd2 = np.array(gd2, dtype=np.int64)
        self.gstart = np.array(starts, dtype=np.int64)
        self.ax = np.concatenate(ax)
        self.ay = np.concatenate(ay)
        self.tx = np.concatenate(tx)
        self.ty = np.concatenate(ty)
        self.w = np.concatenate(ww)

        # exterior: transverse complement (all x1) and the far axial ends
        theta = theta_np(2, s, p)
        ext_xi, ext_w = exterior_rule_1d(n2, h2, c.lo, s, p, q)
        ga, gw = gauss_legendre(2)
        nq = ext_xi.shape[1]
        rows = []
        for c2 in range(n2):
            # (axial coord, transverse coord, fixed weight, lump factor, r)
            pa, pt, wb, wr, rr = [], [], [], [], []
            for a, wa in zip(ga, gw):
                pa.append(np.full(nq, a))
                pt.append(ext_xi[c2])
                wb.append(2.0 * theta * h1 * wa * ext_w[c2])
                wr.append(np.zeros(nq))
                rr.append(np.full(nq, np.nan))
            for d2 in range(-(n2 - 1), n2):
                if not 0 <= c2 + d2 < n2:
                    continue
                rule = rules[abs(d2)]
                if d2 == 0:
                    # only x matters: spread the ordered rule over both orderings
                    pts = np.concatenate([rule.xi_x, rule.xi_y])
                    nus = 0.5 * np.concatenate([rule.nu, rule.nu])
                    rs = np.concatenate([rule.r, rule.r])
                else:
                    pts = rule.xi_x if d2 > 0 else rule.xi_y
                    nus, rs = rule.nu, rule.r
                pa.append(np.full(pts.size, 0.5))
                pt.append(pts)
                wb.append(np.zeros(pts.size))
                wr.append(2.0 * nus)
                rr.append(rs)
            rows.append([np.concatenate(x) for x in (pa, pt, wb, wr, rr)])
        kmax = max(r[0].size for r in rows)
        ua = np.zeros((n2, kmax))
        ut = np.zeros((n2, kmax))
        uw = np.zeros((n1, n2, kmax))
        tail_cache = {}

        def tail(D, r):
            key = (D, float(r))
            if key not in tail_cache:
                tail_cache[key] = axial_tail_weight(D, r, h1, alpha)
            return tail_cache[key]

        for c2, (pa, pt, wb, wr, rr) in enumerate(rows):
            k = pa.size
            ua[c2, :k] = pa
            ut[c2, :k] = pt
            lumped = ~np.isnan(rr)
            for i in range(n1):
                lump = np.zeros(k)
                lump[lumped] = [tail(n1 + 1 - i, r) + tail(i + 2, r) for r in rr[lumped]]
                uw[i, c2, :k] = wb + wr * lump
        self.ua, self.ut, self.uw = ua, ut, uw

    # -- evaluation --------------------------------------------------------
    def parts(self, values: np.ndarray, want_grad: bool = False):
        """(interaction, exterior, grad_interaction + grad_exterior) of the raw seminorm."""
        p = self.params.p
        if self.grid.dim == 1:
            u = np.ascontiguousarray(values, dtype=float)
            si, gi = K.pairs_1d(u, self.grid.n, self.gd, self.gstart, self.xx, self.yy,
                                self.w, p, self.mode, want_grad)
            se, ge = K.unary_1d(u, self.ext_xi, self.ext_w, p, self.mode, want_grad)
            return si, se, (gi + ge if want_grad else None)
        U = np.ascontiguousarray(values, dtype=float)
        Up = np.zeros((U.shape[0] + 2, U.shape[1]))
        Up[1:-1] = U
        n1p = self.grid.n1 + 2
        args = (n1p, self.grid.cross.n, self.gd1, self.gd2, self.gstart,
                self.ax, self.ay, self.tx, self.ty, self.w, p, self.mode)
        if want_grad:
            s_all, g_all = K.pairs_2d(Up, *args, True, 0)
            se, ge = K.unary_2d(U, self.ua, self.ut, self.uw, p, self.mode, True)
            return s_all, se, g_all[1:-1] + ge
        s_in, _ = K.pairs_2d(Up, *args, False, 1)
        s_pad, _ = K.pairs_2d(Up, *args, False, 2)
        se, _ = K.unary_2d(U, self.ua, self.ut, self.uw, p, self.mode, False)
        return s_in, s_pad + se, None

    def seminorm(self, values: np.ndarray) -> float:
        si, se, _ = self.parts(values)
        return si + se

    def seminorm_and_grad(self, values: np.ndarray):
        s, se, g = self.parts(values, want_grad=True)
        return s + se, g


@lru_cache(maxsize=32)
def pair_operator(grid, params: FractionalParams, quad: QuadratureSpec) -> PairOperator:
    return PairOperator(grid, params, quad)


def _check(u: DiscreteFunction, params: FractionalParams):
    if u.grid.dim != params.dim:
        raise ValueError(f"function lives in dimension {u.grid.dim}, params.dim={params.dim}")


def _quad(quad):
    return QuadratureSpec() if quad is None else quad


def seminorm_p(u: DiscreteFunction, params: FractionalParams,
               quad: QuadratureSpec | None = None) -> float:
    """Quadrature value of ``[u]^p`` over R^N x R^N with zero extension."""
    _check(u, params)
    return pair_operator(u.grid, params, _quad(quad)).seminorm(u.values)


def _load(u: DiscreteFunction, f: DiscreteFunction) -> float:
    if f.grid != u.grid:
        raise ValueError("u and f live on different grids")
    return float(np.dot(mass_matrix(u.grid) @ f.values.ravel(), u.values.ravel()))


def energy(u: DiscreteFunction, f: DiscreteFunction, params: FractionalParams,
           quad: QuadratureSpec | None = None) -> float:
    """``C/(2p) [u]^p - int f u``."""
    _check(u, params)
    load = _load(u, f)
    return params.c_kernel / (2.0 * params.p) * seminorm_p(u, params, quad) - load


def _interior(grid, arr):
    a = np.reshape(arr, grid.shape)
    return a[1:-1].copy() if grid.dim == 1 else a[1:-1, 1:-1].ravel()


def energy_gradient(u: DiscreteFunction, f: DiscreteFunction, params: FractionalParams,
                    quad: QuadratureSpec | None = None) -> np.ndarray:
    """Derivative of ``energy`` with respect to the interior nodal values."""
    _check(u, params)
    if f.grid != u.grid:
        raise ValueError("u and f live on different grids")
    op = pair_operator(u.grid, params, _quad(quad))
    _, g = op.seminorm_and_grad(u.values)
    load = mass_matrix(u.grid) @ f.values.ravel()
    return _interior(u.grid, params.c_kernel / (2.0 * params.p) * g.ravel() - load)


def energy_report(u: DiscreteFunction, f: DiscreteFunction, params: FractionalParams,
                  quad: QuadratureSpec | None = None) -> EnergyReport:
    _check(u, params)
    si, se, _ = pair_operator(u.grid, params, _quad(quad)).parts(u.values)
    return EnergyReport(si + se, si, se, _load(u, f))


def exterior_kernel(x2: float, lo: float, hi: float, params: FractionalParams,
                    quad: QuadratureSpec | None = None, order: int = 24) -> float:
    """``int_{R minus (lo, hi)} |x2 - y|^(-1 - sp) dy`` by quadrature plus analytic tail.

    The strip between the interval and ``tail_radius`` is integrated with
    graded Gauss panels; the rest comes from ``tail_integral``.  This is an
    independent route to the closed form used by the energy tables.
    """
    if params.dim != 1:
        raise ValueError("exterior_kernel works on the cross-section (dim 1)")
    if not lo < x2 < hi:
        raise ValueError("x2 must lie inside the interval")
    R = _quad(quad).radius(hi - lo)
    sigma = params.sp
    t, w = gauss_legendre(order)
    total = 0.0
    for dist in (x2 - lo, hi - x2):
        # |y - x2| from dist to R, panels doubling away from the boundary
        edges = [dist]
        while edges[-1] < R:
            edges.append(min(R, dist + 2.0 * (edges[-1] - dist) + dist * 0.25))
        e = np.array(edges)
        a, b = e[:-1, None], e[1:, None]
        z = a + (b - a) * t
        total += float(np.sum((b - a) * w * z ** (-1.0 - sigma)))
    return total + tail_integral(x2, R, params)


def exterior_kappa_closed(x2, lo, hi, params: FractionalParams):
    """Closed form of ``exterior_kernel``."""
    return exterior_kappa(np.asarray(x2, dtype=float), lo, hi, params.sp)
