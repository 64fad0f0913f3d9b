"""Batch command-line front end.

Exit codes: 0 success, 2 a check failed, 1 the run could not be carried out.
Outputs go to ``--out``; without it, to a fresh timestamped directory under
``$FRACCYL_OUT`` (default ``./fraccyl-runs``).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from dataclasses import asdict, dataclass, field

from . import __version__
from .analysis import (
    check_cutoff,
    check_elementary_inequalities,
    energy_growth_report,
    fiber_identity_report,
    parabolic_growth_report,
    poincare_constant,
    verify_h_ell_bound,
)
from .config import RATE_KINDS, load_config
from .constants import c_nsp, reduction_residual, theta_np
from .energy import energy_report
from .experiments import elliptic_rate_study, parabolic_rate_study
from .grids import ConfigurationError, sample_forcing
from .solvers import NonConvergenceError, solve_elliptic, solve_parabolic, weak_residual

COMMANDS = ("constants", "poincare", "solve-elliptic", "solve-cross-section",
            "solve-parabolic", "verify", "rate-elliptic", "rate-parabolic")
CHECKS = ("cutoff", "h-ell", "fiber", "inequalities", "energy-growth", "parabolic-growth")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="microseconds")


@dataclass
class RunManifest:
    subcommand: str
    config_digest: str
    version: str = __version__
    started: str = field(default_factory=_now)
    finished: str = ""
    passed: bool | None = None
    summary: dict = field(default_factory=dict)
    argv: list = field(default_factory=list)

    def append_to(self, directory) -> None:
        """Add this run to ``manifest.json``, keeping earlier entries."""
        path = os.path.join(directory, "manifest.json")
        runs = []
        if os.path.exists(path):
            with open(path) as fh:
                runs = json.load(fh)["runs"]
        runs.append(asdict(self))
        with open(path, "w") as fh:
            json.dump({"runs": runs}, fh, indent=2, sort_keys=True)


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {err}") from err


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("run control")
    g.add_argument("--config", help="TOML file with problem/grid/quadrature/solver/study sections")
    g.add_argument("--out", help="output directory")
    g.add_argument("--force", action="store_true", help="reuse an existing output directory")
    g.add_argument("--threads", type=int, help="worker threads (1 for serial runs)")
    o = common.add_argument_group("overrides")
    o.add_argument("--s", type=float)
    o.add_argument("--p", type=float)
    o.add_argument("--lo", type=float)
    o.add_argument("--hi", type=float)
    o.add_argument("--ell", type=float, help="cylinder half-length")
    o.add_argument("--h", type=float, help="mesh spacing")
    o.add_argument("--h1", type=float, help="axial mesh spacing")
    o.add_argument("--grad-tol", type=float)
    o.add_argument("--max-iters", type=int)
    o.add_argument("--ell-list", type=_floats, help="comma-separated half-lengths")
    o.add_argument("--ell0", type=float)
    o.add_argument("--tau", type=float)
    o.add_argument("--t-end", type=float)

    parser = _Parser(prog="fraccyl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    c = sub.add_parser("constants", parents=[common], help="kernel constants")
    c.add_argument("--N", type=int, default=2, help="dimension")
    pc = sub.add_parser("poincare", parents=[common], help="discrete Poincare quotient")
    pc.add_argument("--domain", choices=("cross", "cylinder"), default="cylinder")
    sub.add_parser("solve-elliptic", parents=[common], help="stationary cylinder problem")
    sub.add_parser("solve-cross-section", parents=[common], help="stationary interval problem")
    sp = sub.add_parser("solve-parabolic", parents=[common], help="gradient-flow trajectory")
    sp.add_argument("--domain", choices=("cross", "cylinder"), default="cylinder")
    sp.add_argument("--save-every", type=int, default=1)
    v = sub.add_parser("verify", parents=[common], help="auxiliary checks")
    v.add_argument("check", choices=CHECKS)
    v.add_argument("--samples", type=int, default=1_000_000)
    v.add_argument("--seed", type=int, default=0)
    sub.add_parser("rate-elliptic", parents=[common], help="elliptic sweep over ell")
    sub.add_parser("rate-parabolic", parents=[common], help="parabolic sweep over ell")
    return parser


def _overrides(args) -> dict:
    return {
        "problem": {"s": args.s, "p": args.p, "lo": args.lo, "hi": args.hi, "ell": args.ell},
        "grid": {"h": args.h, "h1": args.h1},
        "solver": {"grad_tol": args.grad_tol, "max_iters": args.max_iters},
        "study": {"ell_list": args.ell_list, "ell0": args.ell0, "tau": args.tau,
                  "t_end": args.t_end},
    }


def _out_dir(args, explicit_only=False):
    if args.out:
        return args.out
    if explicit_only and "FRACCYL_OUT" not in os.environ:
        return None
    root = os.environ.get("FRACCYL_OUT", "fraccyl-runs")
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    return os.path.join(root, f"{args.command}-{stamp}")


def _write_json(directory, name, obj):
    with open(os.path.join(directory, name), "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# handlers: each returns (passed, summary)


def _constants(args, cfg, out):
    pr = cfg.params(2)
    n = args.N
    if n < 2:
        raise ConfigurationError("--N must be at least 2")
    s, p = pr.s, pr.p
    res = {"N": n, "s": s, "p": p, "C_N": c_nsp(n, s, p), "theta_N": theta_np(n, s, p),
           "C_N-1": c_nsp(n - 1, s, p), "reduction_residual": reduction_residual(n, s, p)}
    for k, val in res.items():
        print(f"{k} = {val!r}")
    if out:
        _write_json(out, "constants.json", res)
    return res["reduction_residual"] < 1e-10, res


def _poincare(args, cfg, out):
    if args.domain == "cross":
        grid, params = cfg.cross_grid(), cfg.params(1)
    else:
        grid, params = cfg.cylinder_grid(), cfg.params(2)
    est = poincare_constant(grid, params, cfg.solver(), cfg.quad())
    est.minimizer.to_csv(os.path.join(out, "minimizer.csv"))
    res = {"domain": args.domain, "value": est.value, "normalized": est.normalized,
           "iterations": est.iterations, "grad_norm": est.grad_norm}
    _write_json(out, "poincare.json", res)
    print(f"quotient = {est.value!r}  (times C: {est.normalized!r}, {est.iterations} iterations)")
    return True, res


def _stationary(grid, params, cfg, out):
    f = sample_forcing(cfg.forcing(), grid)
    opts = cfg.solver()
    u, info = solve_elliptic(grid, f, params, cfg.quad(), opts, return_info=True)
    res_max = float(abs(weak_residual(u, f, params, cfg.quad())).max())
    u.to_csv(os.path.join(out, "solution.csv"))
    rep = energy_report(u, f, params, cfg.quad())
    with open(os.path.join(out, "energy.json"), "w") as fh:
        fh.write(rep.to_json() + "\n")
    res = {"iterations": info.iterations, "grad_norm": info.grad_norm,
           "tolerance": info.tolerance, "weak_residual_max": res_max,
           "seminorm_p": rep.seminorm_p}
    _write_json(out, "solve.json", res)
    print(f"converged in {info.iterations} iterations, weak residual {res_max:.3e} "
          f"(tolerance {info.tolerance:.3e})")
    return res_max <= info.tolerance * (1 + 1e-9), res


def _solve_elliptic(args, cfg, out):
    return _stationary(cfg.cylinder_grid(), cfg.params(2), cfg, out)


def _solve_cross(args, cfg, out):
    return _stationary(cfg.cross_grid(), cfg.params(1), cfg, out)


def _solve_parabolic(args, cfg, out):
    if args.domain == "cross":
        grid, params = cfg.cross_grid(), cfg.params(1)
    else:
        grid, params = cfg.cylinder_grid(), cfg.params(2)
    traj = solve_parabolic(grid, cfg.forcing("u0"), cfg.forcing(), params, cfg.quad(),
                           cfg.parabolic())
    traj.save(out, args.save_every)
    ok = all(traj.dissipation_ok)
    bad = traj.dissipation_ok.count(False)
    print(f"{len(traj.times) - 1} steps, dissipation fails at {bad} of them")
    return ok, {"steps": len(traj.times) - 1, "dissipation_ok": ok}


def _verify(args, cfg, out):
    pr = cfg.params(2)
    st = cfg.data["study"]
    name = args.check
    if name == "cutoff":
        rep = check_cutoff()
    elif name == "h-ell":
        rep = verify_h_ell_bound(st["ell_list"], pr.s, pr.p, cfg.quad())
    elif name == "fiber":
        rep = fiber_identity_report(quad=cfg.quad())
    elif name == "inequalities":
        rep = check_elementary_inequalities(pr.p, args.samples, args.seed)
    elif name == "energy-growth":
        rep = energy_growth_report(st["ell_list"], cfg.forcing(), pr, cfg.quad(), cfg.solver(),
                                   cfg.cross_grid(), cfg.h1())
    else:
        rep = parabolic_growth_report(st["ell_list"], cfg.forcing("u0"), cfg.forcing(), pr,
                                      cfg.quad(), cfg.parabolic(), cfg.cross_grid(), cfg.h1())
    rep.write(out)
    summary = rep.summary()
    print(f"{rep.check_name}: {'pass' if rep.passed else 'FAIL'} "
          f"(worst ratio {rep.worst_ratio!r})")
    if name == "inequalities":
        print(f"violations: {summary['parameters']['violations']}")
    return rep.passed, summary


def _rate(args, cfg, out):
    study = cfg.study()
    sol_dir = os.path.join(out, "solutions") if cfg.data["study"]["save_solutions"] else None
    fn = elliptic_rate_study if args.command == "rate-elliptic" else parabolic_rate_study
    result = fn(study, sol_dir)
    result.write(out)
    for ell, err in result.table:
        print(f"ell = {ell:g}  error = {err!r}")
    f = result.fit
    print(f"slope {f.slope:.4f} (guaranteed {-f.theoretical:.4f}, need <= "
          f"{-f.slack * f.theoretical:.4f}); decreasing: {result.decreasing}; "
          f"{'pass' if result.passed else 'FAIL'}")
    return result.passed, result.summary()


HANDLERS = {
    "constants": _constants,
    "poincare": _poincare,
    "solve-elliptic": _solve_elliptic,
    "solve-cross-section": _solve_cross,
    "solve-parabolic": _solve_parabolic,
    "verify": _verify,
    "rate-elliptic": _rate,
    "rate-parabolic": _rate,
}


def _prepare_out(out, force):
    if os.path.exists(os.path.join(out, "manifest.json")) and not force:
        raise ConfigurationError(f"{out} already holds a run; pass --force to reuse it")
    os.makedirs(out, exist_ok=True)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 1
    import numba

    saved_threads = numba.get_num_threads()
    try:
        if args.threads is not None:
            if not 1 <= args.threads <= numba.config.NUMBA_NUM_THREADS:
                raise ConfigurationError(
                    f"--threads must lie in [1, {numba.config.NUMBA_NUM_THREADS}]")
            numba.set_num_threads(args.threads)
        kind = args.command if args.command in RATE_KINDS else None
        cfg = load_config(args.config, kind, _overrides(args))
        out = _out_dir(args, explicit_only=args.command == "constants")
        if out:
            _prepare_out(out, args.force)
            with open(os.path.join(out, "config.toml"), "w") as fh:
                fh.write(cfg.canonical_text())
        manifest = RunManifest(args.command, cfg.digest, argv=argv)
        passed, summary = HANDLERS[args.command](args, cfg, out)
    except (ConfigurationError, NonConvergenceError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    finally:
        numba.set_num_threads(saved_threads)
    if out:
        manifest.finished = _now()
        manifest.passed = bool(passed)
        manifest.summary = summary
        manifest.append_to(out)
        print(f"outputs in {out}")
    return 0 if passed else 2


if __name__ == "__main__":
    sys.exit(main())
