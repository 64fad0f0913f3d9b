"""Sweeps over the cylinder half-length comparing cylinder solutions with the
cross-section limit, and log-log rate fits of the observed errors."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .constants import FractionalParams
from .energy import QuadratureSpec
from .grids import (
    ConfigurationError,
    ForcingSpec,
    Window,
    extend_cross_section,
    lp_norm,
    make_cross_section_grid,
    make_cylinder_grid,
    sample_forcing,
)
from .solvers import (
    NonConvergenceError,
    ParabolicOptions,
    SolverOptions,
    solve_cross_section,
    solve_elliptic,
    solve_parabolic,
)

__all__ = [
    "HypothesisError",
    "RateStudyConfig",
    "RateFit",
    "StudyResult",
    "theoretical_elliptic_rate",
    "theoretical_parabolic_rate",
    "elliptic_exponents",
    "fit_loglog_slope",
    "elliptic_rate_study",
    "parabolic_rate_study",
]


class HypothesisError(ValueError):
    """Parameters outside the range where the decay estimates are available."""


def _gate(s: float, p: float) -> None:
    if not p > 2:
        raise HypothesisError(f"decay estimates need p > 2, got p={p}")
    thr = (p - 1.0) / p
    if not thr < s < 1:
        raise HypothesisError(
            f"decay estimates need (p-1)/p < s < 1, got s={s} with (p-1)/p={thr:.6g}")


def elliptic_exponents(s: float, p: float) -> tuple[float, float]:
    """The two exponents inside the elliptic bound, each divided by p - 1."""
    _gate(s, p)
    a = s * (p - 1.0) - (p - 1.0) / p
    b = s - (p - 1.0) / p
    return a / (p - 1.0), b / (p - 1.0)


def theoretical_elliptic_rate(s: float, p: float) -> float:
    """Guaranteed decay exponent of the windowed L^p error in the elliptic case."""
    return min(elliptic_exponents(s, p))


def theoretical_parabolic_rate(s: float, p: float) -> float:
    """Guaranteed decay exponent of the combined parabolic error."""
    _gate(s, p)
    return min(s * p - 1.0, s * p / (p - 1.0) - 1.0)


@dataclass(frozen=True)
class RateStudyConfig:
    s: float = 0.9
    p: float = 2.5
    lo: float = -1.0
    hi: float = 1.0
    h: float = 0.25
    ell_list: tuple = (2.0, 4.0, 8.0, 16.0)
    ell0: float = 1.0
    forcing: ForcingSpec = ForcingSpec()
    u0: ForcingSpec = ForcingSpec(kind="bump", value=1.0, radius=1.0)
    t_end: float = 1.0
    tau: float = 0.05
    slack: float = 0.5
    allowance: float = 0.05
    quad: QuadratureSpec = QuadratureSpec()
    solver: SolverOptions = SolverOptions()

    def __post_init__(self):
        ells = tuple(float(e) for e in self.ell_list)
        object.__setattr__(self, "ell_list", ells)
        if not ells:
            raise ConfigurationError("ell_list is empty")
        if any(b <= a for a, b in zip(ells[:-1], ells[1:])):
            raise ConfigurationError("ell_list must be strictly increasing")
        if not 0 < self.ell0 < ells[0]:
            raise ConfigurationError(f"need 0 < ell0 < min(ell_list), got ell0={self.ell0}")
        if not self.hi > self.lo:
            raise ConfigurationError("omega must have hi > lo")
        if not self.h > 0:
            raise ConfigurationError("h must be positive")
        if not 0 < self.slack:
            raise ConfigurationError("slack must be positive")

    def params(self, dim: int) -> FractionalParams:
        return FractionalParams(dim, self.s, self.p)

    def popts(self) -> ParabolicOptions:
        return ParabolicOptions(tau=self.tau, t_end=self.t_end, inner=self.solver)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ell_list"] = list(self.ell_list)
        d["forcing"]["table"] = list(self.forcing.table)
        d["u0"]["table"] = list(self.u0.table)
        init = d["solver"]["init"]
        if not isinstance(init, str):
            d["solver"]["init"] = "custom"
        return d


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    theoretical: float = math.nan
    passed: bool = False
    slack: float = 0.5
    trivial: bool = False
    n_points: int = 0

    def judge(self, theoretical: float, slack: float) -> "RateFit":
        self.theoretical = float(theoretical)
        self.slack = float(slack)
        self.passed = self.trivial or self.slope <= -slack * theoretical
        return self


def fit_loglog_slope(points) -> RateFit:
    """Least-squares line through ``(log x, log y)``.

    All-zero ordinates give a degenerate fit flagged as trivially passed; zero
    or non-finite ordinates among positive ones are dropped.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if pts and all(y == 0.0 for _, y in pts):
        return RateFit(0.0, -math.inf, 1.0, passed=True, trivial=True, n_points=len(pts))
    use = [(x, y) for x, y in pts if x > 0 and y > 0 and math.isfinite(y)]
    if len(use) < 2:
        raise ValueError(f"need at least 2 points with positive values, got {len(use)}")
    lx = np.log([x for x, _ in use])
    ly = np.log([y for _, y in use])
    if np.ptp(lx) == 0:
        raise ValueError("abscissae coincide")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    sst = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if sst == 0 else max(0.0, 1.0 - float(np.sum(resid ** 2)) / sst)
    return RateFit(float(slope), float(intercept), r2, n_points=len(use))


def _decreasing(values, allowance: float) -> bool:
    vals = [v for v in values if math.isfinite(v)]
    return all(b <= (1.0 + allowance) * a for a, b in zip(vals[:-1], vals[1:]))


@dataclass
class StudyResult:
    """Rows of the sweep plus fits; ``fit`` is the one the verdict uses."""

    kind: str
    config: RateStudyConfig
    rows: list
    fit: RateFit
    fits: dict = field(default_factory=dict)
    decreasing: bool = True
    failures: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.fit.passed and self.decreasing and not self.failures

    @property
    def table(self):
        key = "error" if self.kind == "elliptic" else "combined"
        return [(r["ell"], r[key]) for r in self.rows]

    def summary(self) -> dict:
        return _clean({"kind": self.kind, "config": self.config.to_dict(),
                       "fit": asdict(self.fit),
                       "fits": {k: asdict(v) for k, v in self.fits.items()},
                       "decreasing": self.decreasing, "pass": self.passed,
                       "failures": self.failures, **self.extra})

    def write(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "study.json"), "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
        keys = list(self.rows[0].keys()) if self.rows else ["ell"]
        with open(os.path.join(directory, "errors.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(keys)
            for r in self.rows:
                w.writerow([repr(float(r[k])) for k in keys])
        with open(os.path.join(directory, "loglog.dat"), "w") as fh:
            fh.write("# log(ell) log(error)\n")
            for ell, err in self.table:
                if err > 0 and math.isfinite(err):
                    fh.write(f"{math.log(ell)!r} {math.log(err)!r}\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _grids(cfg: RateStudyConfig):
    cross = make_cross_section_grid(cfg.lo, cfg.hi, cfg.h)
    return cross, [make_cylinder_grid(ell, cross, cfg.h) for ell in cfg.ell_list]


def elliptic_rate_study(cfg: RateStudyConfig, solutions_dir=None) -> StudyResult:
    """Windowed L^p distance between cylinder solutions and the cross-section limit."""
    rate = theoretical_elliptic_rate(cfg.s, cfg.p)
    cross, grids = _grids(cfg)
    f_inf = sample_forcing(cfg.forcing, cross)
    u_inf = solve_cross_section(cross, f_inf, cfg.params(1), cfg.quad, cfg.solver)
    window = Window(cfg.ell0)
    rows, failures = [], []
    if solutions_dir is not None:
        os.makedirs(solutions_dir, exist_ok=True)
        u_inf.to_csv(os.path.join(solutions_dir, "cross_section.csv"))
    for ell, g in zip(cfg.ell_list, grids):
        f = sample_forcing(cfg.forcing, g)
        try:
            u = solve_elliptic(g, f, cfg.params(2), cfg.quad, cfg.solver)
        except NonConvergenceError as err:
            failures.append({"ell": ell, "message": str(err)})
            rows.append({"ell": ell, "error": math.nan})
            continue
        err = lp_norm(u - extend_cross_section(u_inf, g), window, cfg.p)
        rows.append({"ell": ell, "error": err})
        if solutions_dir is not None:
            u.to_csv(os.path.join(solutions_dir, f"u_ell_{ell:g}.csv"))
    fit = fit_loglog_slope([(r["ell"], r["error"]) for r in rows]).judge(rate, cfg.slack)
    a, b = elliptic_exponents(cfg.s, cfg.p)
    return StudyResult("elliptic", cfg, rows, fit, {"error": fit},
                       _decreasing([r["error"] for r in rows], cfg.allowance), failures,
                       {"candidate_exponents": [a, b]})


def parabolic_rate_study(cfg: RateStudyConfig, solutions_dir=None) -> StudyResult:
    """Sup-in-time L^2 and time-integrated L^p window errors against the
    cross-section trajectory; the verdict uses their sum."""
    rate = theoretical_parabolic_rate(cfg.s, cfg.p)
    cross, grids = _grids(cfg)
    popts = cfg.popts()
    traj_inf = solve_parabolic(cross, cfg.u0, cfg.forcing, cfg.params(1), cfg.quad, popts)
    window = Window(cfg.ell0)
    rows, failures, dissipation = [], [], {"cross_section": all(traj_inf.dissipation_ok)}
    if solutions_dir is not None:
        traj_inf.save(os.path.join(solutions_dir, "cross_section"))
    for ell, g in zip(cfg.ell_list, grids):
        try:
            traj = solve_parabolic(g, cfg.u0, cfg.forcing, cfg.params(2), cfg.quad, popts)
        except NonConvergenceError as err:
            failures.append({"ell": ell, "message": str(err)})
            rows.append({"ell": ell, "sup_l2_sq": math.nan, "lp_p_sum": math.nan,
                         "combined": math.nan})
            continue
        sup2, acc = 0.0, 0.0
        for k, (u, ui) in enumerate(zip(traj.states, traj_inf.states)):
            diff = u - extend_cross_section(ui, g)
            sup2 = max(sup2, lp_norm(diff, window, 2.0) ** 2)
            if k > 0:
                acc += popts.tau * lp_norm(diff, window, cfg.p) ** cfg.p
        rows.append({"ell": ell, "sup_l2_sq": sup2, "lp_p_sum": acc, "combined": sup2 + acc})
        dissipation[f"{ell:g}"] = all(traj.dissipation_ok)
        if solutions_dir is not None:
            traj.save(os.path.join(solutions_dir, f"ell_{ell:g}"))
    fits = {}
    for key in ("sup_l2_sq", "lp_p_sum", "combined"):
        fits[key] = fit_loglog_slope([(r["ell"], r[key]) for r in rows]).judge(rate, cfg.slack)
    return StudyResult("parabolic", cfg, rows, fits["combined"], fits,
                       _decreasing([r["combined"] for r in rows], cfg.allowance), failures,
                       {"dissipation_ok": dissipation})
