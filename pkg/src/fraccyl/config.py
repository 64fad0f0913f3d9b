"""TOML run configuration: schema, validation, canonical form and digest."""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass

import tomli
import tomli_w

from .constants import FractionalParams
from .experiments import HypothesisError, RateStudyConfig, _gate
from .grids import (
    ConfigurationError,
    ForcingSpec,
    make_cross_section_grid,
    make_cylinder_grid,
)
from .quadrature import QuadratureSpec
from .solvers import ParabolicOptions, SolverOptions

__all__ = ["RunConfig", "load_config", "parse_config", "DEFAULTS"]

_FORCING = {"kind": "constant", "value": 1.0, "radius": 1.0, "center": 0.0, "growth": 0.0,
            "table": []}
_U0 = dict(_FORCING, kind="bump")

# None marks optional keys that are omitted from the canonical form when unset
DEFAULTS = {
    "problem": {"s": 0.9, "p": 2.5, "lo": -1.0, "hi": 1.0, "ell": 4.0,
                "forcing": _FORCING, "u0": _U0},
    "grid": {"h": 0.25, "h1": None},
    "quadrature": {"near_split": 4, "far_order": 3, "tail_radius": None, "pair_cutoff": None},
    "solver": {"grad_tol": 1e-8, "max_iters": 20000, "backtrack_shrink": 0.5,
               "armijo_c": 1e-4, "memory": 10},
    "study": {"ell_list": [2.0, 4.0, 8.0, 16.0], "ell0": 1.0, "t_end": 1.0, "tau": 0.05,
              "slack": 0.5, "allowance": 0.05, "save_solutions": False},
}

_INT_KEYS = {"near_split", "far_order", "max_iters", "memory"}
_STR_KEYS = {"kind"}
_BOOL_KEYS = {"save_solutions"}
_LIST_KEYS = {"ell_list", "table"}

RATE_KINDS = ("rate-elliptic", "rate-parabolic")


def _coerce(key, value, where, errors):
    """Type-check one leaf; returns the normalized value."""
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            errors.append(f"{where}: expected true/false, got {value!r}")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            errors.append(f"{where}: expected a string, got {value!r}")
        return value
    if key in _LIST_KEYS:
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            errors.append(f"{where}: expected a list of numbers, got {value!r}")
            return value
        return [float(v) for v in value]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{where}: expected a number, got {value!r}")
        return value
    if key in _INT_KEYS:
        if isinstance(value, float) and not value.is_integer():
            errors.append(f"{where}: expected an integer, got {value!r}")
            return value
        return int(value)
    return float(value)


def _merge(defaults, given, where, errors):
    out = {}
    for key, value in given.items():
        if key not in defaults:
            errors.append(f"{where}{key}: unknown key")
    for key, dval in defaults.items():
        path = f"{where}{key}"
        if isinstance(dval, dict):
            sub = given.get(key, {})
            if not isinstance(sub, dict):
                errors.append(f"{path}: expected a table")
                sub = {}
            out[key] = _merge(dval, sub, path + ".", errors)
        elif key in given:
            out[key] = _coerce(key, given[key], path, errors)
        elif dval is not None:
            out[key] = copy.deepcopy(dval)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``data`` is the canonical nested dict."""

    data: dict
    kind: str | None = None

    def canonical_text(self) -> str:
        return tomli_w.dumps(self.data)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def _sec(self, name):
        return self.data[name]

    def params(self, dim: int) -> FractionalParams:
        pr = self._sec("problem")
        return FractionalParams(dim, pr["s"], pr["p"])

    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(**self._sec("quadrature"))

    def solver(self) -> SolverOptions:
        return SolverOptions(**self._sec("solver"))

    def forcing(self, which: str = "forcing") -> ForcingSpec:
        d = dict(self._sec("problem")[which])
        d["table"] = tuple(d["table"])
        return ForcingSpec(**d)

    def cross_grid(self):
        pr = self._sec("problem")
        return make_cross_section_grid(pr["lo"], pr["hi"], self._sec("grid")["h"])

    def h1(self) -> float:
        g = self._sec("grid")
        return g.get("h1", g["h"])

    def cylinder_grid(self, ell: float | None = None):
        ell = self._sec("problem")["ell"] if ell is None else ell
        return make_cylinder_grid(ell, self.cross_grid(), self.h1())

    def parabolic(self) -> ParabolicOptions:
        st = self._sec("study")
        return ParabolicOptions(tau=st["tau"], t_end=st["t_end"], inner=self.solver())

    def study(self) -> RateStudyConfig:
        pr, st = self._sec("problem"), self._sec("study")
        return RateStudyConfig(
            s=pr["s"], p=pr["p"], lo=pr["lo"], hi=pr["hi"], h=self._sec("grid")["h"],
            ell_list=tuple(st["ell_list"]), ell0=st["ell0"], forcing=self.forcing(),
            u0=self.forcing("u0"), t_end=st["t_end"], tau=st["tau"], slack=st["slack"],
            allowance=st["allowance"], quad=self.quad(), solver=self.solver())


def _validate(cfg: RunConfig, errors: list) -> None:
    checks = [
        ("problem", lambda: cfg.params(2)),
        ("problem.forcing", lambda: cfg.forcing()),
        ("problem.u0", lambda: cfg.forcing("u0")),
        ("quadrature", cfg.quad),
        ("solver", cfg.solver),
        ("grid", lambda: cfg.cylinder_grid()),
        ("study", cfg.parabolic),
    ]
    grid = cfg.data["grid"]
    if "h1" in grid and grid["h1"] != grid["h"] and cfg.kind in RATE_KINDS:
        errors.append("grid.h1: rate studies use the same spacing in both directions")
    if cfg.kind in RATE_KINDS:
        checks.append(("study", cfg.study))
        pr = cfg.data["problem"]
        try:
            _gate(pr["s"], pr["p"])
        except HypothesisError as err:
            errors.append(f"problem: p > 2 and s ∈ (1/p′,1) required; {err}")
    for where, fn in checks:
        try:
            fn()
        except (ValueError, TypeError) as err:
            errors.append(f"{where}: {err}")


def parse_config(text: str = "", kind: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Parse TOML text, apply ``{section: {key: value}}`` overrides, fill
    defaults and validate.  Raises ConfigurationError listing every problem."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ConfigurationError(f"config is not valid TOML: {err}") from err
    for sec, vals in (overrides or {}).items():
        raw.setdefault(sec, {})
        for k, v in vals.items():
            if v is not None:
                raw[sec][k] = v
    errors: list = []
    for sec in raw:
        if sec not in DEFAULTS:
            errors.append(f"{sec}: unknown section")
    data = _merge(DEFAULTS, {k: v for k, v in raw.items() if k in DEFAULTS}, "", errors)
    data = {k: data[k] for k in DEFAULTS}
    if errors:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(errors))
    cfg = RunConfig(data, kind)
    _validate(cfg, errors)
    if errors:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(errors))
    return cfg


def load_config(path=None, kind: str | None = None, overrides: dict | None = None) -> RunConfig:
    text = ""
    if path is not None:
        try:
            with open(path, "rb") as fh:
                text = fh.read().decode()
        except OSError as err:
            raise ConfigurationError(f"cannot read config {path}: {err}") from err
    return parse_config(text, kind, overrides)
