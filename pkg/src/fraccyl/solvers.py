"""Energy minimization for the stationary problem and implicit time stepping.

All solves run a gradient descent on the exact discrete objective with
Barzilai-Borwein trial steps and a nonmonotone Armijo backtracking test.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constants import FractionalParams
from .energy import QuadratureSpec, pair_operator
from .grids import (
    ConfigurationError,
    DiscreteFunction,
    ForcingSpec,
    mass_matrix,
    sample_forcing,
)

__all__ = [
    "SolverOptions",
    "ParabolicOptions",
    "SolveInfo",
    "Trajectory",
    "NonConvergenceError",
    "StepError",
    "minimize",
    "solve_elliptic",
    "solve_cross_section",
    "parabolic_step",
    "solve_parabolic",
    "weak_residual",
]


class NonConvergenceError(RuntimeError):
    """Raised when the descent stops before reaching the gradient tolerance."""

    def __init__(self, message, last_iterate=None, grad_norm=math.nan, iterations=0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm
        self.iterations = iterations


class StepError(NonConvergenceError):
    """Inner solve of a time step failed; ``step`` is the 1-based step index."""

    def __init__(self, message, step, cause: NonConvergenceError):
        super().__init__(message, cause.last_iterate, cause.grad_norm, cause.iterations)
        self.step = step


@dataclass(frozen=True)
class SolverOptions:
    """Descent controls.

    grad_tol is relative: a solve stops once ``max|grad| <= grad_tol * scale``
    where ``scale`` is the sup-norm of the load vector (the gradient at zero),
    or 1 when the load vanishes.  ``init`` is "zero" or a DiscreteFunction.
    """

    grad_tol: float = 1e-8
    max_iters: int = 20000
    backtrack_shrink: float = 0.5
    armijo_c: float = 1e-4
    init: object = "zero"
    memory: int = 10

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ConfigurationError("grad_tol must be positive")
        if not (0 < self.backtrack_shrink < 1 and 0 < self.armijo_c < 1):
            raise ConfigurationError("backtrack_shrink and armijo_c must lie in (0, 1)")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigurationError("max_iters must be a positive integer")
        if not (isinstance(self.init, str) and self.init == "zero") and \
                not isinstance(self.init, DiscreteFunction):
            raise ConfigurationError("init must be 'zero' or a DiscreteFunction")


@dataclass(frozen=True)
class ParabolicOptions:
    tau: float = 0.05
    t_end: float = 1.0
    inner: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not (self.tau > 0 and self.t_end > 0):
            raise ConfigurationError("tau and t_end must be positive")
        if self.tau > self.t_end * (1 + 1e-12):
            raise ConfigurationError("tau must not exceed t_end")
        k = self.t_end / self.tau
        if abs(k - round(k)) > 1e-12 * max(1.0, k):
            raise ConfigurationError(f"t_end/tau = {k} is not an integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.tau))


@dataclass
class SolveInfo:
    iterations: int
    grad_norm: float
    tolerance: float
    objective: float
    evaluations: int


# ---------------------------------------------------------------------------
# generic descent


def minimize(fun: Callable, x0: np.ndarray, tol: float, opts: SolverOptions):
    """Minimize a convex C^1 function given ``fun(x) -> (value, grad)``.

    Returns ``(x, value, grad, SolveInfo)``; raises NonConvergenceError.
    """
    x = np.array(x0, dtype=float)
    fx, g = fun(x)
    nev = 1
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    hist = [fx]
    step = None
    x_prev = g_prev = None
    it = 0
    while gnorm > tol:
        if it >= opts.max_iters:
            raise NonConvergenceError(
                f"no convergence after {it} iterations (|grad|={gnorm:.3e}, tol={tol:.3e})",
                x, gnorm, it)
        if x_prev is not None:
            s = x - x_prev
            y = g - g_prev
            sy = float(np.dot(s, y))
            if sy > 0:
                # alternate the two Barzilai-Borwein lengths
                step = float(np.dot(s, s)) / sy if it % 2 else sy / float(np.dot(y, y))
        if step is None or not math.isfinite(step) or step <= 0:
            # first move changes some nodal value by about one unit
            step = 1.0 / max(gnorm, 1e-300)
        d = -g
        slope = float(np.dot(g, d))
        ref = max(hist[-opts.memory:])
        noise = 1e-13 * max(abs(ref), 1e-300)
        for _ in range(60):
            xt = x + step * d
            ft, gt = fun(xt)
            nev += 1
            if ft <= ref + opts.armijo_c * step * slope + noise:
                break
            step *= opts.backtrack_shrink
        else:
            raise NonConvergenceError(
                f"line search failed at iteration {it} (|grad|={gnorm:.3e})", x, gnorm, it)
        x_prev, g_prev = x, g
        x, fx, g = xt, ft, gt
        hist.append(fx)
        gnorm = float(np.max(np.abs(g)))
        it += 1
    return x, fx, g, SolveInfo(it, gnorm, tol, fx, nev)


# ---------------------------------------------------------------------------
# stationary problems


def _default_quad(quad):
    return QuadratureSpec() if quad is None else quad


def _objective(grid, f: DiscreteFunction, params: FractionalParams, quad: QuadratureSpec):
    """Energy and gradient as functions of the interior nodal values."""
    op = pair_operator(grid, params, quad)
    M = mass_matrix(grid)
    load_full = M @ f.values.ravel()
    shape = grid.shape
    coef = params.c_kernel / (2.0 * params.p)
    if grid.dim == 1:
        inner = np.zeros(shape, dtype=bool)
        inner[1:-1] = True
    else:
        inner = np.zeros(shape, dtype=bool)
        inner[1:-1, 1:-1] = True
    mask = inner.ravel()
    load = load_full[mask]

    def fun(x):
        vals = np.zeros(shape)
        vals.ravel()[mask] = x
        s, gs = op.seminorm_and_grad(vals)
        return coef * s - float(np.dot(load, x)), coef * gs.ravel()[mask] - load

    return fun, load, mask


def _start(grid, opts: SolverOptions):
    if isinstance(opts.init, DiscreteFunction):
        if opts.init.grid != grid:
            raise ConfigurationError("warm start lives on a different grid")
        return opts.init.dofs()
    return np.zeros(grid.n_dofs)


def _scale(load):
    s = float(np.max(np.abs(load))) if load.size else 0.0
    return s if s > 0 else 1.0


def solve_elliptic(grid, f: DiscreteFunction, params: FractionalParams,
                   quad: QuadratureSpec | None = None, opts: SolverOptions | None = None,
                   return_info: bool = False):
    """Minimize ``C/(2p)[u]^p - int f u`` over grid functions vanishing off the domain."""
    quad = _default_quad(quad)
    opts = SolverOptions() if opts is None else opts
    if f.grid != grid:
        raise ValueError("forcing lives on a different grid")
    if grid.dim != params.dim:
        raise ValueError(f"grid dimension {grid.dim} differs from params.dim={params.dim}")
    fun, load, _ = _objective(grid, f, params, quad)
    tol = opts.grad_tol * _scale(load)
    try:
        x, _, _, info = minimize(fun, _start(grid, opts), tol, opts)
    except NonConvergenceError as err:
        if err.last_iterate is not None:
            err.last_iterate = DiscreteFunction.from_dofs(grid, err.last_iterate)
        raise
    u = DiscreteFunction.from_dofs(grid, x)
    return (u, info) if return_info else u


def solve_cross_section(cross, f: DiscreteFunction, params: FractionalParams,
                        quad: QuadratureSpec | None = None,
                        opts: SolverOptions | None = None, return_info: bool = False):
    """Stationary problem on the interval; ``params.dim`` must be 1."""
    if params.dim != 1 or cross.dim != 1:
        raise ValueError("the cross-section problem is one-dimensional (params.dim = 1)")
    return solve_elliptic(cross, f, params, quad, opts, return_info)


def weak_residual(u: DiscreteFunction, f: DiscreteFunction, params: FractionalParams,
                  quad: QuadratureSpec | None = None) -> np.ndarray:
    """``a(u, v_i) - int f v_i`` for every interior basis function ``v_i``."""
    fun, _, _ = _objective(u.grid, f, params, _default_quad(quad))
    return fun(u.dofs())[1]


# ---------------------------------------------------------------------------
# time stepping


def _step_objective(grid, u_prev, f, params, quad, tau):
    fun, load, mask = _objective(grid, f, params, quad)
    M = mass_matrix(grid)[mask][:, mask]
    xp = u_prev.dofs()

    def step_fun(x):
        e, g = fun(x)
        dx = x - xp
        Md = M @ dx
        return e + 0.5 * float(np.dot(dx, Md)) / tau, g + Md / tau

    return step_fun, fun, load


def parabolic_step(u_prev: DiscreteFunction, f_slice: DiscreteFunction, tau: float,
                   params: FractionalParams, quad: QuadratureSpec | None = None,
                   inner_opts: SolverOptions | None = None, return_info: bool = False):
    """One implicit Euler step: minimize ``|v - u_prev|^2/(2 tau) + J(v)``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    quad = _default_quad(quad)
    grid = u_prev.grid
    if f_slice.grid != grid:
        raise ValueError("forcing lives on a different grid")
    opts = SolverOptions() if inner_opts is None else inner_opts
    step_fun, fun, load = _step_objective(grid, u_prev, f_slice, params, quad, tau)
    tol = opts.grad_tol * _scale(load)
    x0 = _start(grid, opts) if isinstance(opts.init, DiscreteFunction) else u_prev.dofs()
    x, obj, _, info = minimize(step_fun, x0, tol, opts)
    u = DiscreteFunction.from_dofs(grid, x)
    if not return_info:
        return u
    j_prev = fun(u_prev.dofs())[0]
    j_next = fun(x)[0]
    return u, info, {"objective": obj, "J_prev": j_prev, "J_next": j_next,
                     "move": obj - j_next}


@dataclass
class Trajectory:
    times: list
    states: list
    dissipation_ok: list
    diagnostics: list = field(default_factory=list)

    def save(self, directory, save_every: int = 1) -> str:
        """One CSV per saved time plus ``index.json``; returns the index path."""
        os.makedirs(directory, exist_ok=True)
        entries = []
        last = len(self.times) - 1
        for k, (t, u) in enumerate(zip(self.times, self.states)):
            if k % save_every and k != last:
                continue
            name = f"state_{k:05d}.csv"
            u.to_csv(os.path.join(directory, name))
            entries.append({"step": k, "time": t, "file": name})
        index = {
            "times": list(self.times),
            "saved": entries,
            "dissipation_ok": list(self.dissipation_ok),
            "steps": self.diagnostics,
        }
        path = os.path.join(directory, "index.json")
        with open(path, "w") as fh:
            json.dump(index, fh, indent=2, sort_keys=True)
        return path


def _sample(spec, grid, t=None, dirichlet=False):
    if isinstance(spec, DiscreteFunction):
        if spec.grid != grid:
            raise ValueError("sampled data lives on a different grid")
        return spec
    if isinstance(spec, ForcingSpec):
        return sample_forcing(spec, grid, t, dirichlet)
    if callable(spec):
        return spec(grid, t)
    raise ConfigurationError(f"cannot sample {spec!r}")


def solve_parabolic(grid, u0_spec, f_spec, params: FractionalParams,
                    quad: QuadratureSpec | None = None,
                    popts: ParabolicOptions | None = None,
                    dissipation_tol: float = 1e-10) -> Trajectory:
    """Minimizing-movement trajectory on ``[0, t_end]`` with ``f`` taken at step ends."""
    quad = _default_quad(quad)
    popts = ParabolicOptions() if popts is None else popts
    u = _sample(u0_spec, grid, 0.0, dirichlet=True)
    if not u.dirichlet:
        u = DiscreteFunction(grid, u.values)
    times, states, flags, diags = [0.0], [u], [], []
    for k in range(1, popts.n_steps + 1):
        t = k * popts.tau
        f = _sample(f_spec, grid, t)
        try:
            u_next, info, d = parabolic_step(u, f, popts.tau, params, quad, popts.inner,
                                             return_info=True)
        except NonConvergenceError as err:
            raise StepError(f"step {k} (t={t:g}) failed: {err}", k, err) from err
        scale = max(1.0, abs(d["J_prev"]))
        ok = d["objective"] <= d["J_prev"] + dissipation_tol * scale
        times.append(t)
        states.append(u_next)
        flags.append(bool(ok))
        diags.append({"step": k, "time": t, "iterations": info.iterations,
                      "grad_norm": info.grad_norm, "J_prev": d["J_prev"],
                      "J_next": d["J_next"], "objective": d["objective"]})
        u = u_next
    return Trajectory(times, states, flags, diags)
