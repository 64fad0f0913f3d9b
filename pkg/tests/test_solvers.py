import json
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.special import gamma as G

from fraccyl.constants import FractionalParams, c_nsp, theta_np
from fraccyl.energy import seminorm_p
from fraccyl.grids import (
    ConfigurationError,
    DiscreteFunction,
    ForcingSpec,
    lp_norm,
    make_cross_section_grid,
    make_cylinder_grid,
    sample_forcing,
)
from fraccyl.solvers import (
    NonConvergenceError,
    ParabolicOptions,
    SolverOptions,
    StepError,
    parabolic_step,
    solve_cross_section,
    solve_elliptic,
    solve_parabolic,
    weak_residual,
)


def torsion_errors(hs=(1 / 8, 1 / 16, 1 / 32)):
    """Relative L^2 distance to the ball torsion function at s = 1/2, p = 2."""
    s = 0.5
    lam = 4 ** s * G(0.5 + s) * G(1 + s) / G(0.5)
    pr = FractionalParams(1, s, 2.0)
    errs = []
    for h in hs:
        g = make_cross_section_grid(-1, 1, h)
        u = solve_cross_section(g, sample_forcing(ForcingSpec(), g), pr)
        # compare on a fine sample to capture the square-root edge
        x = np.linspace(-1, 1, 20001)
        diff = u(x) - np.sqrt(1 - x ** 2) / lam
        errs.append(math.sqrt(trapezoid(diff ** 2, x) / trapezoid((1 - x ** 2) / lam ** 2, x)))
    return errs


def test_zero_forcing_gives_zero(cyl, params2, cross, params1):
    assert not solve_elliptic(cyl, DiscreteFunction.zeros(cyl), params2).values.any()
    assert not solve_cross_section(cross, DiscreteFunction.zeros(cross), params1).values.any()


def test_torsion_oracle():
    errs = torsion_errors()
    assert errs[-1] < 0.05
    assert errs[0] > errs[1] > errs[2]


def test_even_forcing_gives_even_solution(cyl, params2):
    f = sample_forcing(ForcingSpec("bump", radius=0.8), cyl)
    u = solve_elliptic(cyl, f, params2, opts=SolverOptions(grad_tol=1e-10))
    v = u.values
    assert np.max(np.abs(v - v[::-1])) < 1e-8
    assert np.max(np.abs(v - v[:, ::-1])) < 1e-8


def test_weak_residual_within_tolerance(cyl, params2):
    f = sample_forcing(ForcingSpec(), cyl)
    u, info = solve_elliptic(cyl, f, params2, return_info=True)
    res = weak_residual(u, f, params2)
    assert np.max(np.abs(res)) <= info.tolerance
    assert info.tolerance == pytest.approx(1e-8 * np.max(np.abs(weak_residual(
        DiscreteFunction.zeros(cyl), f, params2))))


def test_reduced_constant_gives_same_solution(cross):
    s, p = 0.9, 2.5
    pr = FractionalParams(1, s, p)
    alt = FractionalParams(1, s, p)
    object.__setattr__(alt, "c_kernel", c_nsp(2, s, p) * theta_np(2, s, p))
    f = sample_forcing(ForcingSpec(), cross)
    a = solve_cross_section(cross, f, pr)
    b = solve_cross_section(cross, f, alt)
    assert np.max(np.abs(a.values - b.values)) < 1e-8 * np.max(np.abs(a.values))


def test_cross_section_needs_dim_one(cross, params2):
    with pytest.raises(ValueError):
        solve_cross_section(cross, DiscreteFunction.zeros(cross), params2)


def test_nonconvergence_carries_iterate(cyl, params2):
    f = sample_forcing(ForcingSpec(), cyl)
    with pytest.raises(NonConvergenceError) as info:
        solve_elliptic(cyl, f, params2, opts=SolverOptions(max_iters=2))
    err = info.value
    assert isinstance(err.last_iterate, DiscreteFunction) and err.grad_norm > 0


def test_warm_start_converges_fast(cyl, params2):
    f = sample_forcing(ForcingSpec(), cyl)
    u, cold = solve_elliptic(cyl, f, params2, return_info=True)
    _, warm = solve_elliptic(cyl, f, params2, opts=SolverOptions(init=u), return_info=True)
    assert warm.iterations <= 2 < cold.iterations


@pytest.mark.parametrize("kw", [dict(grad_tol=0), dict(max_iters=0), dict(armijo_c=2.0),
                                dict(init="ones")])
def test_solver_options_validation(kw):
    with pytest.raises(ConfigurationError):
        SolverOptions(**kw)


@pytest.mark.parametrize("kw", [dict(tau=0.0), dict(tau=0.3, t_end=1.0), dict(tau=2.0)])
def test_parabolic_options_validation(kw):
    with pytest.raises(ConfigurationError):
        ParabolicOptions(**kw)


def test_step_fixed_point(cross, params1):
    z = DiscreteFunction.zeros(cross)
    assert not parabolic_step(z, z, 0.1, params1).values.any()


def test_step_decreases_seminorm_and_shrinks_with_tau(cross, params1):
    u0 = sample_forcing(ForcingSpec("bump"), cross, dirichlet=True)
    z = DiscreteFunction.zeros(cross)
    opts = SolverOptions(grad_tol=1e-12)
    moves = []
    for tau in (0.02, 0.01, 0.005):
        u1 = parabolic_step(u0, z, tau, params1, inner_opts=opts)
        assert seminorm_p(u1, params1) < seminorm_p(u0, params1)
        moves.append(lp_norm(u1 - u0))
    for a, b in zip(moves[:-1], moves[1:]):
        assert b / a == pytest.approx(0.5, rel=0.2)


def test_zero_trajectory(cross, params1):
    traj = solve_parabolic(cross, ForcingSpec(value=0.0), ForcingSpec(value=0.0), params1,
                           popts=ParabolicOptions(tau=0.1, t_end=0.3))
    assert len(traj.states) == 4
    assert all(not u.values.any() for u in traj.states)


def test_trajectory_approaches_steady_state(tmp_path):
    cross = make_cross_section_grid(-1, 1, 0.25)
    g = make_cylinder_grid(2.0, cross, 0.25)
    pr = FractionalParams(2, 0.9, 2.5)
    f = ForcingSpec()
    u_ell = solve_elliptic(g, sample_forcing(f, g), pr, opts=SolverOptions(grad_tol=1e-10))
    traj = solve_parabolic(g, ForcingSpec("bump"), f, pr,
                           popts=ParabolicOptions(tau=0.1, t_end=1.0))
    assert all(traj.dissipation_ok)
    dist = [lp_norm(u - u_ell) for u in traj.states]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(dist[:-1], dist[1:]))
    index = traj.save(tmp_path / "traj", save_every=3)
    data = json.loads(open(index).read())
    assert [e["step"] for e in data["saved"]] == [0, 3, 6, 9, 10]
    assert (tmp_path / "traj" / "state_00010.csv").exists()


def test_step_error_reports_index(cross, params1):
    with pytest.raises(StepError) as info:
        solve_parabolic(cross, ForcingSpec("bump"), ForcingSpec(), params1,
                        popts=ParabolicOptions(tau=0.5, t_end=1.0,
                                               inner=SolverOptions(max_iters=1)))
    assert info.value.step == 1
