"""End-to-end acceptance checks, one per numbered criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line with the measured
quantities, then asserts.  Run standalone with ``python3 tests/test_acceptance.py``
or through pytest (``pytest -s`` is not needed; the lines bypass capture).
"""

import json
import math
import sys
import time

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.special import gamma as G

from fraccyl.analysis import (
    check_cutoff,
    check_elementary_inequalities,
    energy_growth_report,
    fiber_identity_report,
    h_ell,
    parabolic_growth_report,
    poincare_constant,
    verify_h_ell_bound,
)
from fraccyl.cli import main as cli_main
from fraccyl.constants import FractionalParams, reduction_residual, theta_np, theta_quadrature
from fraccyl.energy import energy, energy_gradient
from fraccyl.grids import (
    DiscreteFunction,
    ForcingSpec,
    lp_norm,
    make_cross_section_grid,
    make_cylinder_grid,
    sample_forcing,
)
from fraccyl.solvers import (
    ParabolicOptions,
    SolverOptions,
    solve_cross_section,
    solve_elliptic,
    solve_parabolic,
    weak_residual,
)

S, P = 0.9, 2.5
RESULTS = {}


def _emit(request, n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = ok
    capman = request.config.pluginmanager.getplugin("capturemanager") if request else None
    if capman is not None:
        with capman.global_and_fixture_disabled():
            print("\n" + line)
    else:
        print(line)


@pytest.fixture(scope="module")
def studies(tmp_path_factory):
    """Default rate studies run once through the command line."""
    root = tmp_path_factory.mktemp("studies")
    out = {}
    for kind in ("rate-elliptic", "rate-parabolic"):
        d = root / kind
        t0 = time.time()
        code = cli_main([kind, "--out", str(d)])
        out[kind] = {"dir": d, "code": code, "seconds": time.time() - t0,
                     "study": json.loads((d / "study.json").read_text())}
    return out


def test_01_constants(request):
    worst_red, worst_theta = 0.0, 0.0
    for n in (2, 3):
        for s in (0.3, 0.5, 0.8, 0.9):
            for p in (2.0, 2.5, 3.0, 4.0):
                worst_red = max(worst_red, reduction_residual(n, s, p))
                th = theta_np(n, s, p)
                worst_theta = max(worst_theta, abs(theta_quadrature(n, s, p) - th) / th)
    ok = worst_red < 1e-10 and worst_theta < 1e-8
    _emit(request, 1, ok, f"max reduction residual {worst_red:.2e} (<1e-10), "
                          f"max theta quadrature gap {worst_theta:.2e} (<1e-8)")
    assert ok


def test_02_fiber_identity(request):
    rep = fiber_identity_report()
    _emit(request, 2, rep.passed, f"max residual {rep.worst_ratio:.2e} over "
                                  f"{len(rep.rows)} probes (<1e-6)")
    assert rep.passed and len(rep.rows) == 27


def _fd_error(grid, params, rng, step=1e-6):
    u = DiscreteFunction.from_dofs(grid, rng.normal(size=grid.n_dofs))
    f = DiscreteFunction(grid, rng.normal(size=grid.shape), dirichlet=False)
    g = energy_gradient(u, f, params)
    x = u.dofs()
    fd = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        fd[i] = (energy(DiscreteFunction.from_dofs(grid, x + e), f, params)
                 - energy(DiscreteFunction.from_dofs(grid, x - e), f, params)) / (2 * step)
    return float(np.max(np.abs(fd - g)) / np.max(np.abs(g)))


def test_03_gradient(request):
    rng = np.random.default_rng(2024)
    errs = []
    ps = (2.0, 2.5, 3.0)
    for k in range(5):
        n_cells = int(rng.integers(3, 12))
        g = make_cross_section_grid(0.0, n_cells * 0.25, 0.25)
        errs.append(_fd_error(g, FractionalParams(1, float(rng.uniform(0.55, 0.95)), ps[k % 3]),
                              rng))
    cross = make_cross_section_grid(-1.0, 1.0, 0.5)
    for k, ell in enumerate((0.5, 1.0, 2.0)):
        g = make_cylinder_grid(ell, cross, 0.5)
        assert g.n_dofs <= 30
        errs.append(_fd_error(g, FractionalParams(2, float(rng.uniform(0.55, 0.95)), ps[k]),
                              rng))
    ok = max(errs) < 1e-5
    _emit(request, 3, ok, f"max relative FD error {max(errs):.2e} over 5 1D + 3 2D instances "
                          "(<1e-5)")
    assert ok


def test_04_elliptic_oracle(request):
    s = 0.5
    lam = 4 ** s * G(0.5 + s) * G(1 + s) / G(0.5)
    pr = FractionalParams(1, s, 2.0)
    x = np.linspace(-1, 1, 20001)
    exact = np.sqrt(1 - x ** 2) / lam
    errs = []
    for h in (1 / 8, 1 / 16, 1 / 32):
        g = make_cross_section_grid(-1, 1, h)
        u = solve_cross_section(g, sample_forcing(ForcingSpec(), g), pr)
        errs.append(math.sqrt(trapezoid((u(x) - exact) ** 2, x) / trapezoid(exact ** 2, x)))
    ok = errs[-1] < 0.05 and errs[0] > errs[1] > errs[2]
    _emit(request, 4, ok, "L2 relative errors " + ", ".join(f"{e:.3%}" for e in errs)
          + f" at h=1/8,1/16,1/32 (lambda_1={lam:.6g} from the closed form)")
    assert ok


def test_05_weak_residual(request, studies):
    worst = 0.0
    n = 0
    cross = make_cross_section_grid(-1, 1, 0.25)
    cases = []
    for p in (2.0, 2.5, 3.0):
        for spec in (ForcingSpec(), ForcingSpec("bump", radius=0.7)):
            cases.append((cross, FractionalParams(1, S, p), spec))
            cases.append((make_cylinder_grid(2.0, cross, 0.25), FractionalParams(2, S, p), spec))
    for ell in (2.0, 4.0, 8.0, 16.0):
        cases.append((make_cylinder_grid(ell, cross, 0.25), FractionalParams(2, S, P),
                      ForcingSpec()))
    for grid, pr, spec in cases:
        f = sample_forcing(spec, grid)
        u, info = solve_elliptic(grid, f, pr, return_info=True)
        worst = max(worst, float(np.max(np.abs(weak_residual(u, f, pr)))) / info.tolerance)
        n += 1
    ok = worst <= 1.0
    _emit(request, 5, ok, f"{n} solves, max residual / (grad_tol * scale) = {worst:.3f} (<=1)")
    assert ok


def test_06_inequalities(request):
    rep = check_elementary_inequalities(P, 1_000_000, 7)
    v = rep.parameters["violations"]
    ok = rep.passed
    _emit(request, 6, ok, f"violations {v} in 10^6 samples; (1) checked with constant "
                          f"2^(2-q), constant 1 gives {rep.parameters['unit_constant_violations']}")
    assert ok


def test_07_cutoff_and_h_ell(request):
    cut = check_cutoff(10_000)
    ells = [2.0, 4.0, 8.0, 16.0]
    at0 = [h_ell(0.0, e, S, P) * e ** (S * P) for e in ells]
    spread0 = max(at0) / min(at0)
    rep = verify_h_ell_bound(ells, S, P)
    spread_in = rep.parameters["inside_spread"]
    ok = cut.passed and spread0 <= 1.10 and spread_in <= 1.25
    _emit(request, 7, ok, f"rho constraints {'hold' if cut.passed else 'fail'}; "
                          f"ell^sp h(0) spread {spread0:.4f} (<=1.10); inside sup spread "
                          f"{spread_in:.4f} (<=1.25)")
    assert ok


def test_08_poincare(request):
    cross = make_cross_section_grid(-1, 1, 0.25)
    base = poincare_constant(cross, FractionalParams(1, S, P))
    vals = [poincare_constant(make_cylinder_grid(ell, cross, 0.25), FractionalParams(2, S, P))
            for ell in (2.0, 4.0, 8.0)]
    norm = [v.normalized for v in vals]
    raw = [v.value for v in vals]
    nonincr = all(b <= a for a, b in zip(raw[:-1], raw[1:]))
    above = min(norm) >= 0.95 * base.normalized
    ok = nonincr and above
    _emit(request, 8, ok, "C-weighted quotients " + ", ".join(f"{v:.4f}" for v in norm)
          + f" at ell=2,4,8 vs cross-section {base.normalized:.4f}; "
          f"nonincreasing={nonincr}, >= 95% of cross-section={above}")
    assert ok


def test_09_energy_growth(request):
    cross = make_cross_section_grid(-1, 1, 0.25)
    pr = FractionalParams(2, S, P)
    ell_rep = energy_growth_report([2.0, 4.0, 8.0], ForcingSpec(), pr, cross=cross)
    par_rep = parabolic_growth_report([2.0, 4.0, 8.0], ForcingSpec("bump"), ForcingSpec(), pr,
                                      popts=ParabolicOptions(tau=0.05, t_end=1.0), cross=cross)
    ok = ell_rep.parameters["spread"] <= 2 and par_rep.parameters["spread"] <= 2
    _emit(request, 9, ok, f"elliptic [u]^p/ell spread {ell_rep.parameters['spread']:.4f}, "
                          f"parabolic quantity/ell spread {par_rep.parameters['spread']:.4f} "
                          f"(both <=2; parabolic linear-growth check "
                          f"{'holds' if par_rep.passed else 'fails'})")
    assert ok


def test_10_dissipation(request, studies):
    flags = studies["rate-parabolic"]["study"]["dissipation_ok"]
    cross = make_cross_section_grid(-1, 1, 0.25)
    g = make_cylinder_grid(2.0, cross, 0.25)
    pr = FractionalParams(2, S, P)
    f = ForcingSpec()
    u_ell = solve_elliptic(g, sample_forcing(f, g), pr, opts=SolverOptions(grad_tol=1e-10))
    traj = solve_parabolic(g, ForcingSpec("bump"), f, pr, popts=ParabolicOptions(0.05, 1.0))
    dist = [lp_norm(u - u_ell) for u in traj.states]
    mono = all(b <= a * (1 + 1e-9) for a, b in zip(dist[:-1], dist[1:]))
    ok = all(flags.values()) and all(traj.dissipation_ok) and mono
    _emit(request, 10, ok, f"dissipation holds on every step of {len(flags) + 1} runs; "
                           f"distance to steady state nonincreasing={mono} "
                           f"({dist[0]:.3e} -> {dist[-1]:.3e})")
    assert ok


def test_11_elliptic_rate(request, studies):
    st = studies["rate-elliptic"]["study"]
    fit = st["fit"]
    ok = studies["rate-elliptic"]["code"] == 0 and st["decreasing"] and fit["slope"] <= -0.1
    _emit(request, 11, ok, f"slope {fit['slope']:.3f} (<= -0.1), decreasing={st['decreasing']}, "
                           f"r^2={fit['r_squared']:.4f}, "
                           f"{studies['rate-elliptic']['seconds']:.0f} s")
    assert ok


def test_12_parabolic_rate(request, studies):
    st = studies["rate-parabolic"]["study"]
    fit = st["fit"]
    ok = studies["rate-parabolic"]["code"] == 0 and st["decreasing"] and fit["slope"] <= -0.25
    _emit(request, 12, ok, f"combined slope {fit['slope']:.3f} (<= -0.25), "
                           f"decreasing={st['decreasing']}, "
                           f"{studies['rate-parabolic']['seconds']:.0f} s")
    assert ok


def test_13_determinism(request, studies, tmp_path):
    same = {}
    for kind in ("rate-elliptic", "rate-parabolic"):
        d = tmp_path / kind
        assert cli_main([kind, "--threads", "1", "--out", str(d)]) == 0
        same[kind] = ((d / "errors.csv").read_bytes()
                      == (studies[kind]["dir"] / "errors.csv").read_bytes())
    ok = all(same.values())
    _emit(request, 13, ok, "errors.csv byte-identical between default threads and --threads 1: "
          + ", ".join(f"{k}={v}" for k, v in same.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
