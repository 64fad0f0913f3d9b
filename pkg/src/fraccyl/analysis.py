"""Numerical checks of the auxiliary estimates: cutoff profile, h_ell, fiber
identity, Poincare quotients, elementary inequalities and energy growth."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .constants import FractionalParams, scaled_fiber_integral, theta_np
from .energy import QuadratureSpec, pair_operator, seminorm_p
from .grids import (
    DiscreteFunction,
    ForcingSpec,
    cell_quadrature,
    lp_norm,
    make_cylinder_grid,
    sample_forcing,
)
from .quadrature import gauss_legendre
from .solvers import (
    NonConvergenceError,
    ParabolicOptions,
    SolverOptions,
    solve_elliptic,
    solve_parabolic,
)

__all__ = [
    "Report",
    "PoincareEstimate",
    "rho",
    "rho_ell",
    "h_ell",
    "check_cutoff",
    "verify_h_ell_bound",
    "fiber_identity_residual",
    "fiber_identity_report",
    "poincare_constant",
    "quadratic_form_spectrum",
    "check_elementary_inequalities",
    "energy_growth_report",
    "parabolic_growth_report",
]


@dataclass
class Report:
    """Outcome of one verification sweep: per-probe rows plus a verdict."""

    check_name: str
    passed: bool
    worst_ratio: float
    parameters: dict
    rows: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"check_name": self.check_name, "pass": bool(self.passed),
                "worst_ratio": _jsonable(self.worst_ratio),
                "parameters": _jsonable(self.parameters)}

    def rows_csv(self) -> str:
        buf = io.StringIO()
        if self.rows:
            keys = list(self.rows[0].keys())
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(keys)
            for row in self.rows:
                w.writerow([_fmt(row[k]) for k in keys])
        return buf.getvalue()

    def write(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, f"{self.check_name}.csv"), "w", newline="") as fh:
            fh.write(self.rows_csv())
        with open(os.path.join(directory, f"{self.check_name}.json"), "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# cutoff and h_ell


def rho(x1):
    """Trapezoid: 1 on [-1/2, 1/2], 0 off (-1, 1), slope 2 in between."""
    x = np.abs(np.asarray(x1, dtype=float))
    out = np.clip(2.0 * (1.0 - x), 0.0, 1.0)
    return out if out.ndim else float(out)


def rho_ell(x1, ell: float):
    if not ell > 0:
        raise ValueError("ell must be positive")
    return rho(np.asarray(x1, dtype=float) / ell)


def _smooth_panel(a, b, y, fun, order):
    """Gauss on [a, b] (y outside), panels refined geometrically toward y."""
    near, far = (a, b) if abs(a - y) < abs(b - y) else (b, a)
    gap = abs(near - y)
    edges = [near]
    step = max(gap, 1e-3 * abs(b - a))
    pos = near
    sign = 1.0 if far > near else -1.0
    while abs(far - pos) > step:
        pos = pos + sign * step
        edges.append(pos)
        step *= 2.0
    edges.append(far)
    e = np.sort(np.array(edges))
    t, w = gauss_legendre(order)
    lo, hi = e[:-1, None], e[1:, None]
    x = lo + (hi - lo) * t
    return float(np.sum((hi - lo) * w * fun(x)))


def h_ell(y1: float, ell: float, s: float, p: float,
          quad: QuadratureSpec | None = None) -> float:
    """``int_R |rho_ell(x) - rho_ell(y1)|^p |x - y1|^(-1 - sp) dx``.

    The profile is linear between its breakpoints, so the two pieces touching
    ``y1`` are integrated in closed form; the others are smooth.
    """
    quad = QuadratureSpec() if quad is None else quad
    order = max(16, 4 * quad.far_order)
    sigma = s * p
    beta = p - 1.0 - sigma
    y1 = float(y1)
    ry = rho_ell(y1, ell)
    bps = sorted({-ell, -0.5 * ell, 0.5 * ell, ell, y1})
    total = 0.0

    def integrand(x):
        return np.abs(rho_ell(x, ell) - ry) ** p * np.abs(x - y1) ** (-1.0 - sigma)

    for a, b in zip(bps[:-1], bps[1:]):
        if a == y1 or b == y1:
            mid = 0.5 * (a + b)
            slope = 0.0 if abs(mid) >= ell or abs(mid) <= 0.5 * ell else 2.0 / ell
            total += slope ** p * (b - a) ** (beta + 1.0) / (beta + 1.0)
        else:
            total += _smooth_panel(a, b, y1, integrand, order)
    # rho vanishes beyond the outer breakpoints
    lo, hi = bps[0], bps[-1]
    c = abs(ry) ** p
    if c > 0:
        total += c * ((y1 - lo) ** (-sigma) + (hi - y1) ** (-sigma)) / sigma
    return total


def check_cutoff(n_samples: int = 10_000, span: float = 2.0) -> Report:
    """Pointwise constraints on ``rho`` over a uniform sample of [-span, span]."""
    x = np.linspace(-span, span, n_samples)
    r = rho(x)
    slopes = np.abs(np.diff(r) / np.diff(x))
    checks = {
        "range": bool(np.all((r >= 0) & (r <= 1))),
        "plateau": bool(np.all(r[np.abs(x) <= 0.5] == 1.0)),
        "support": bool(np.all(r[np.abs(x) >= 1.0] == 0.0)),
        "lipschitz": bool(slopes.max() <= 2.0 + 1e-12),
        "anchors": rho(0.5) == 1.0 and rho(-0.5) == 1.0 and rho(1.0) == 0.0 and rho(-1.0) == 0.0,
    }
    rows = [{"constraint": k, "holds": int(v)} for k, v in checks.items()]
    return Report("cutoff", all(checks.values()), float(slopes.max()) / 2.0,
                  {"n_samples": n_samples, "span": span, "max_slope": float(slopes.max())}, rows)


def verify_h_ell_bound(ell_list, s: float, p: float, quad: QuadratureSpec | None = None,
                       n_inside: int = 33, outside_factors=(2.5, 4.0, 10.0),
                       stability: float = 1.25, zero_stability: float = 1.1,
                       outside_slack: float = 1.1) -> Report:
    """Sweep ``h_ell`` inside (-2 ell, 2 ell) and outside it.

    Inside rows record ``ell^(sp) h_ell``; outside rows record ``h_ell`` over
    ``(1/sp)(|y1 - ell|^(-sp) + |y1 + ell|^(-sp))``, which is at most 1.
    Passes when the inside sup and ``ell^(sp) h_ell(0)`` are stable across
    ell and no outside ratio exceeds ``outside_slack``.
    """
    ell_list = [float(e) for e in ell_list]
    if not ell_list:
        raise ValueError("ell_list is empty")
    sigma = s * p
    rows = []
    inside_sup, outside_sup, at_zero = {}, {}, {}
    for ell in ell_list:
        at_zero[ell] = h_ell(0.0, ell, s, p, quad) * ell ** sigma
        ys = np.linspace(-2.0 * ell, 2.0 * ell, n_inside + 2)[1:-1]
        vals = [h_ell(y, ell, s, p, quad) * ell ** sigma for y in ys]
        inside_sup[ell] = max(vals)
        for y, v in zip(ys, vals):
            rows.append({"ell": ell, "y1": float(y), "regime": "inside", "normalized": v})
        out = []
        for fac in outside_factors:
            for y in (fac * ell, -fac * ell):
                bracket = abs(y - ell) ** (-sigma) + abs(y + ell) ** (-sigma)
                hv = h_ell(y, ell, s, p, quad)
                r = hv * sigma / bracket
                out.append(r)
                rows.append({"ell": ell, "y1": float(y), "regime": "outside", "normalized": r})
        outside_sup[ell] = max(out)
    ins = list(inside_sup.values())
    spread = max(ins) / min(ins)
    worst_out = max(outside_sup.values())
    z = list(at_zero.values())
    zero_spread = max(z) / min(z)
    passed = spread <= stability and zero_spread <= zero_stability and worst_out <= outside_slack
    params = {"s": s, "p": p, "ell_list": ell_list, "inside_sup": list(ins),
              "outside_sup": list(outside_sup.values()), "inside_spread": spread,
              "scaled_at_zero": z, "zero_spread": zero_spread}
    return Report("h_ell_bound", passed, spread, params, rows)


def fiber_identity_residual(x1: float, y1: float, s: float, p: float,
                            quad: QuadratureSpec | None = None) -> float:
    """Relative gap between the quadrature of the fiber integral and ``|x1 - y1| theta``."""
    if x1 == y1:
        raise ValueError("fiber identity needs x1 != y1")
    a = abs(x1 - y1)
    exact = a * theta_np(2, s, p)
    return abs(scaled_fiber_integral(a, 0.0, 2, s, p, quad) - exact) / exact


def fiber_identity_report(gaps=(0.1, 1.0, 10.0), s_values=(0.3, 0.6, 0.9),
                          p_values=(2.0, 2.5, 4.0), quad: QuadratureSpec | None = None,
                          tol: float = 1e-6) -> Report:
    """``fiber_identity_residual`` over a product grid of gaps, s and p."""
    rows = []
    for p in p_values:
        for s in s_values:
            for a in gaps:
                rows.append({"gap": float(a), "s": float(s), "p": float(p),
                             "residual": fiber_identity_residual(0.0, a, s, p, quad)})
    worst = max(r["residual"] for r in rows)
    return Report("fiber_identity", worst < tol, worst,
                  {"gaps": list(gaps), "s": list(s_values), "p": list(p_values), "tol": tol},
                  rows)


# ---------------------------------------------------------------------------
# Poincare quotient


@dataclass
class PoincareEstimate:
    """``value`` is ``inf [u]^p / |u|_p^p``; ``normalized`` carries the factor C."""

    value: float
    minimizer: DiscreteFunction
    iterations: int
    normalized: float = math.nan
    grad_norm: float = math.nan


def _initial_profile(grid):
    if grid.dim == 1:
        x = grid.nodes
        return np.clip(1.0 - ((x - 0.5 * (grid.lo + grid.hi)) / (0.5 * grid.diameter)) ** 2, 0, None)
    c = grid.cross
    x2 = c.nodes
    b2 = np.clip(1.0 - ((x2 - 0.5 * (c.lo + c.hi)) / (0.5 * c.diameter)) ** 2, 0, None)
    b1 = np.clip(1.0 - (grid.axial_nodes / grid.ell) ** 2, 0, None)
    return np.outer(b1, b2)


def poincare_constant(grid, params: FractionalParams, opts: SolverOptions | None = None,
                      quad: QuadratureSpec | None = None, init=None) -> PoincareEstimate:
    """Minimize ``[u]^p / |u|_p^p`` by normalized gradient descent.

    Each iterate is rescaled to unit L^p norm; the quotient is 0-homogeneous so
    this only fixes the scale.  Stops when the sup-norm of the quotient's
    gradient is below ``grad_tol`` times the quotient.
    """
    opts = SolverOptions(grad_tol=1e-7) if opts is None else opts
    quad = QuadratureSpec() if quad is None else quad
    if grid.dim != params.dim:
        raise ValueError("grid and params dimensions differ")
    op = pair_operator(grid, params, quad)
    B, w = cell_quadrature(grid)
    p = params.p
    shape = grid.shape
    mask = np.zeros(shape, dtype=bool)
    if grid.dim == 1:
        mask[1:-1] = True
    else:
        mask[1:-1, 1:-1] = True
    mask = mask.ravel()

    def full(x):
        v = np.zeros(shape)
        v.ravel()[mask] = x
        return v

    def lnorm(x):
        q = B @ full(x).ravel()
        val = float(np.dot(w, np.abs(q) ** p))
        grad = p * (B.T @ (w * np.abs(q) ** (p - 2.0) * q))
        return val, grad[mask]

    def quotient(x):
        s, gs = op.seminorm_and_grad(full(x))
        L, gl = lnorm(x)
        R = s / L
        return R, (gs.ravel()[mask] - R * gl) / L

    def normalize(x):
        return x / lnorm(x)[0] ** (1.0 / p)

    x0 = _initial_profile(grid).ravel()[mask] if init is None else init.dofs()
    x = normalize(x0)
    R, g = quotient(x)
    step = 1.0 / max(np.max(np.abs(g)), 1e-300)
    x_prev = g_prev = None
    it = 0
    gnorm = float(np.max(np.abs(g)))
    while gnorm > opts.grad_tol * R:
        if it >= opts.max_iters:
            raise NonConvergenceError(
                f"Poincare descent stalled at quotient {R:.10g} (|grad|={gnorm:.3e})",
                DiscreteFunction.from_dofs(grid, x), gnorm, it)
        if x_prev is not None:
            s_ = x - x_prev
            y_ = g - g_prev
            sy = float(np.dot(s_, y_))
            if sy > 0:
                step = float(np.dot(s_, s_)) / sy if it % 2 else sy / float(np.dot(y_, y_))
        slope = -float(np.dot(g, g))
        for _ in range(60):
            xt = normalize(x - step * g)
            Rt, gt = quotient(xt)
            if Rt <= R + opts.armijo_c * step * slope + 1e-14 * R:
                break
            step *= opts.backtrack_shrink
        else:
            raise NonConvergenceError(f"Poincare line search failed at quotient {R:.10g}",
                                      DiscreteFunction.from_dofs(grid, x), gnorm, it)
        x_prev, g_prev = x, g
        x, R, g = xt, Rt, gt
        gnorm = float(np.max(np.abs(g)))
        it += 1
    u = DiscreteFunction.from_dofs(grid, x)
    return PoincareEstimate(R, u, it, params.c_kernel * R, gnorm)


def quadratic_form_spectrum(grid, params: FractionalParams,
                            quad: QuadratureSpec | None = None, k: int = 1):
    """Lowest ``k`` generalized eigenvalues of ``[u]^2`` against the L^2 mass.

    Only meaningful at p = 2, where the seminorm is a quadratic form; its matrix
    is assembled column by column from the gradient, which is linear.  The
    smallest value is the discrete Poincare quotient at p = 2.
    """
    from scipy.linalg import eigh

    from .grids import mass_matrix

    if params.p != 2.0:
        raise ValueError("quadratic_form_spectrum needs p = 2")
    quad = QuadratureSpec() if quad is None else quad
    op = pair_operator(grid, params, quad)
    mask = np.zeros(grid.shape, dtype=bool)
    if grid.dim == 1:
        mask[1:-1] = True
    else:
        mask[1:-1, 1:-1] = True
    idx = np.flatnonzero(mask.ravel())
    A = np.empty((idx.size, idx.size))
    e = np.zeros(grid.shape)
    for col, i in enumerate(idx):
        e.ravel()[i] = 1.0
        _, g = op.seminorm_and_grad(e)
        A[:, col] = 0.5 * g.ravel()[idx]
        e.ravel()[i] = 0.0
    A = 0.5 * (A + A.T)
    M = mass_matrix(grid).toarray()[np.ix_(idx, idx)]
    return eigh(A, M, eigvals_only=True, subset_by_index=[0, k - 1])


# ---------------------------------------------------------------------------
# elementary inequalities


def _phi(x, q):
    a = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > 0, a ** (q - 2.0) * x, 0.0)
    return out


def check_elementary_inequalities(p: float, n_samples: int, seed: int,
                                  rtol: float = 1e-12) -> Report:
    """Randomized search for violations of five elementary inequalities.

    Samples ``a, b`` in [0, 10] and ``c, d`` in [-10, 10]; exponents run over
    ``{p, 2, 3, 4}`` (and ``1/q`` plus uniform draws in [0, 1] for the
    subadditivity bound).  Comparisons allow ``rtol`` times the larger side
    for rounding.  Inequality (1) is checked with the sharp constant
    ``2^(2-q)``; the count for constant 1 is reported as
    ``unit_constant_violations``.  Inequality (5) uses ``max(1, q)``.
    """
    rng = np.random.default_rng(seed)
    qs = sorted({float(p), 2.0, 3.0, 4.0})
    a = rng.uniform(0.0, 10.0, n_samples)
    b = rng.uniform(0.0, 10.0, n_samples)
    c = rng.uniform(-10.0, 10.0, n_samples)
    d = rng.uniform(-10.0, 10.0, n_samples)
    # a share of exact ties exercises the equality cases
    tie = rng.random(n_samples) < 0.01
    b[tie] = a[tie]
    d[tie] = c[tie]
    counts = {k: 0 for k in ("1", "2", "3", "4", "5")}
    worst = {k: 0.0 for k in counts}
    rows = []
    literal_1 = {}

    def tally(key, lhs, rhs, q):
        slack = rtol * np.maximum(np.abs(lhs), np.abs(rhs))
        bad = lhs > rhs + slack
        n_bad = int(bad.sum())
        counts[key] += n_bad
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
        worst[key] = max(worst[key], float(np.max(ratio)))
        rows.append({"inequality": key, "q": q, "samples": int(lhs.size),
                     "violations": n_bad, "max_ratio": float(np.max(ratio))})

    for q in qs:
        diff = np.abs(c - d)
        mono = (_phi(c, q) - _phi(d, q)) * (c - d)
        # (1) strong monotonicity of phi_q.  With constant 1 it fails for q > 2
        # (c = 1, d = -1, q = 3 gives 4 < 8); the sharp constant is 2^(2-q).
        tally("1", 2.0 ** (2.0 - q) * diff ** q, mono, q)
        bad = diff ** q > mono * (1.0 + rtol)
        literal_1[q] = int(bad.sum())
        tally("2", (a + b) ** q, 2.0 ** (q - 1.0) * (a ** q + b ** q), q)
        tally("4", np.abs(a ** q - b ** q), q * np.abs(a - b) * (a ** (q - 1) + b ** (q - 1)), q)
        cq = max(1.0, q)
        tally("5", np.abs(_phi(c, q) - _phi(d, q)),
              cq * diff * (np.abs(c) ** (q - 2.0) + np.abs(d) ** (q - 2.0)), q)
    for q in [1.0 / q for q in qs] + [0.0, 1.0]:
        tally("3", (a + b) ** q, a ** q + b ** q, q)
    q3 = rng.uniform(0.0, 1.0, n_samples)
    tally("3", (a + b) ** q3, a ** q3 + b ** q3, "uniform[0,1]")
    total = sum(counts.values())
    params = {"p": p, "n_samples": n_samples, "seed": seed, "rtol": rtol,
              "violations": counts, "max_ratio": worst, "C(q)": "max(1, q)",
              "monotonicity_constant": "2^(2-q)",
              "unit_constant_violations": {str(k): v for k, v in literal_1.items()}}
    return Report("elementary_inequalities", total == 0, max(worst.values()), params, rows)


# ---------------------------------------------------------------------------
# energy growth along the ell sweep


def energy_growth_report(ell_list, f_spec: ForcingSpec, params: FractionalParams,
                         quad: QuadratureSpec | None = None,
                         opts: SolverOptions | None = None, cross=None, h1=None,
                         poincare=None, spread_limit: float = 2.0,
                         poincare_margin: float = 1.1) -> Report:
    """Solve on each cylinder and compare ``[u_ell]^p / ell`` across the sweep.

    ``cross`` is the cross-section grid (default (-1, 1) with h = 0.25) and
    ``h1`` the axial spacing (default: the cross-section spacing).  ``poincare``
    enables the check ``|u|_p^p <= margin * [u]^p / P``: pass a lower bound
    valid for every cylinder, a dict keyed by ell, or True to compute the
    quotient on each grid.
    """
    from .grids import make_cross_section_grid

    cross = make_cross_section_grid(-1.0, 1.0, 0.25) if cross is None else cross
    h1 = cross.h if h1 is None else h1
    rows, ratios = [], []
    poincare_ok = True
    for ell in ell_list:
        g = make_cylinder_grid(ell, cross, h1)
        f = sample_forcing(f_spec, g)
        u = solve_elliptic(g, f, params, quad, opts)
        sem = seminorm_p(u, params, quad)
        lp = lp_norm(u, None, params.p) ** params.p
        ratio = sem / ell
        ratios.append(ratio)
        row = {"ell": float(ell), "seminorm_p": sem, "ratio": ratio, "lp_p": lp}
        if poincare is not None:
            if poincare is True:
                P = poincare_constant(g, params, quad=quad).value
            elif isinstance(poincare, dict):
                P = poincare[ell]
            else:
                P = float(poincare)
            row["poincare"] = P
            bound = poincare_margin * sem / P
            row["poincare_bound"] = bound
            poincare_ok &= lp <= bound or sem == 0.0
        rows.append(row)
    if max(ratios) == 0.0:
        spread = 1.0
    else:
        spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    params_out = {"ell_list": [float(e) for e in ell_list], "s": params.s, "p": params.p,
                  "spread": spread, "poincare_checked": poincare is not None}
    return Report("energy_growth", spread <= spread_limit and poincare_ok, spread,
                  params_out, rows)


def parabolic_growth_report(ell_list, u0_spec, f_spec, params: FractionalParams,
                            quad: QuadratureSpec | None = None,
                            popts: ParabolicOptions | None = None, cross=None, h1=None,
                            spread_limit: float = 2.0, slack: float = 1.5) -> Report:
    """``sup_k |u(t_k)|_2^2 + tau sum_k |u(t_k)|_p^p`` against linear growth in ell.

    The constant is fitted at the smallest ell; every ell must stay below
    ``slack`` times that line, and the ratio to ell must have spread at most
    ``spread_limit``.
    """
    from .grids import make_cross_section_grid

    cross = make_cross_section_grid(-1.0, 1.0, 0.25) if cross is None else cross
    h1 = cross.h if h1 is None else h1
    popts = ParabolicOptions() if popts is None else popts
    rows, qs = [], []
    ells = sorted(float(e) for e in ell_list)
    for ell in ells:
        g = make_cylinder_grid(ell, cross, h1)
        traj = solve_parabolic(g, u0_spec, f_spec, params, quad, popts)
        sup2 = max(lp_norm(u, None, 2.0) ** 2 for u in traj.states)
        sump = popts.tau * sum(lp_norm(u, None, params.p) ** params.p for u in traj.states[1:])
        q = sup2 + sump
        qs.append(q)
        rows.append({"ell": ell, "sup_l2_sq": sup2, "tau_sum_lp_p": sump, "quantity": q,
                     "ratio": q / ell, "dissipation_ok": all(traj.dissipation_ok)})
    k_emp = qs[0] / ells[0]
    within = all(q <= slack * k_emp * ell for q, ell in zip(qs, ells))
    ratios = [q / e for q, e in zip(qs, ells)]
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else (1.0 if max(ratios) == 0 else math.inf)
    params_out = {"ell_list": ells, "s": params.s, "p": params.p, "tau": popts.tau,
                  "t_end": popts.t_end, "k_emp": k_emp, "spread": spread}
    return Report("parabolic_growth", within and spread <= spread_limit, spread,
                  params_out, rows)
