"""Strict sectioned ``key = value`` configuration.

One schema drives parsing, validation, serialization and the CLI help
text.  Unknown keys, bad values and failed barrier gates are collected as
``(key, line, reason)`` problems and raised together.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from typing import Any

from .errors import ConfigError, PMFrontierError
from .grid import GeomKind, GridGeom
from .io import fmt
from .lv import BarrierKind, LVSubParams, LVSupParams, check_gate
from .model import ModelKind, ModelSpec


class Experiment(str, enum.Enum):
    SIMULATE = "simulate"
    BARRIERS = "barriers"
    SANDWICH_SUB = "sandwich-sub"
    SANDWICH_SUP = "sandwich-sup"
    DECAY = "decay"
    PME_CONVERGE = "pme-converge"
    FRONTIER_DIAG = "frontier-diag"


class InitialKind(str, enum.Enum):
    BARRIER = "barrier"
    BARENBLATT = "barenblatt"
    TABLE = "table"


REQUIRED = object()


@dataclass(frozen=True)
class Key:
    section: str
    name: str
    kind: str
    unit: str
    default: Any
    help: str


def _k(section, name, kind, unit, default, help):
    return Key(section, name, kind, unit, default, help)


SCHEMA: tuple[Key, ...] = (
    _k("run", "experiment", "experiments", "-", REQUIRED, "comma-separated list of experiments"),
    _k("run", "output_dir", "str", "path", "out", "artifact directory; PMFRONTIER_OUT overrides"),
    _k("model", "kind", "enum:tumor,fisher-kpp,custom", "-", "tumor", "pressure-dependent growth model"),
    _k("model", "m", "float", "-", 2.0, "porous-medium exponent, m > 1"),
    _k("model", "p_m", "float", "pressure", None, "homeostatic pressure P_M (tumor, custom)"),
    _k("model", "p_h", "float", "pressure", None, "upper pressure bound P_H >= P_M"),
    _k("model", "custom_g_table", "table", "pressure:rate", None, "custom G as P:G pairs, e.g. 0:1, 1:0"),
    _k("geometry", "kind", "enum:radial,cartesian2d", "-", "radial", "grid type"),
    _k("geometry", "n_dim", "int", "-", 2, "space dimension n of the radial problem"),
    _k("geometry", "h", "float", "length", REQUIRED, "cell size"),
    _k("geometry", "extent", "float", "length", REQUIRED, "outer radius (radial) or half-width (cartesian)"),
    _k("initial", "kind", "enum:barrier,barenblatt,table", "-", "barrier", "initial data"),
    _k("initial", "barrier", "enum:sub,sup", "-", "sub", "barrier family for barrier data"),
    _k("initial", "alpha0", "float", "pressure", 0.5, "sub barrier height alpha(0)"),
    _k("initial", "beta0", "float", "pressure/length^2", 0.1, "sub barrier curvature beta(0)"),
    _k("initial", "lambda0", "float", "pressure", 0.7, "sup barrier height lambda(0)"),
    _k("initial", "kappa0", "float", "pressure/length^2", 0.05, "sup barrier curvature kappa(0)"),
    _k("initial", "lower_alpha0", "float", "pressure", None, "sub barrier below sup data: alpha(0)"),
    _k("initial", "lower_beta0", "float", "pressure/length^2", None, "sub barrier below sup data: beta(0)"),
    _k("initial", "C", "float", "-", 1.0, "Barenblatt constant"),
    _k("initial", "t0", "float", "time", 1.0, "Barenblatt starting time"),
    _k("initial", "path", "str", "path", None, "density table for table data"),
    _k("solver", "t_end", "float", "time", 20.0, "final time"),
    _k("solver", "snapshot_dt", "float", "time", 0.25, "snapshot spacing"),
    _k("solver", "cfl_safety", "float", "-", 0.2, "fraction of the stable step, in (0, 1]"),
    _k("solver", "guard_band", "int", "cells", 4, "cells at the outer edge the support may not enter"),
    _k("lv", "dt", "float", "time", 1e-3, "RK4 step of the barrier system"),
    _k("lv", "t_end", "float", "time", None, "barrier horizon for experiment barriers (default solver t_end)"),
    _k("checks", "refine", "bool", "-", False, "also run at h/2 and apply refinement checks"),
    _k("checks", "C_tol", "float", "pressure/length", None, "sandwich tolerance constant; calibrated if unset"),
    _k("checks", "upper_tol", "float", "pressure", 1e-9, "allowed excess of P over P_M"),
    _k("checks", "refine_ratio", "float", "-", 0.6, "max violation(h/2)/violation(h)"),
    _k("checks", "decay_R", "float", "length", 1.0, "ball radius for the decay fit"),
    _k("checks", "window_lo", "float", "time", 20.0, "decay fit window start"),
    _k("checks", "window_hi", "float", "time", 400.0, "decay fit window end"),
    _k("checks", "exponent_lo", "float", "-", -1.15, "lowest admissible decay exponent"),
    _k("checks", "exponent_hi", "float", "-", -0.85, "highest admissible decay exponent"),
    _k("checks", "roundoff_floor", "float", "pressure", 1e-12, "gap values at or below this are dropped"),
    _k("checks", "lv_window_lo", "float", "time", 100.0, "barrier decay fit window start"),
    _k("checks", "lv_window_hi", "float", "time", 1e4, "barrier decay fit window end"),
    _k("checks", "lv_exponent_tol", "float", "-", 0.02, "allowed distance of the barrier exponent from -1"),
    _k("checks", "pme_hs", "floats", "length", (0.04, 0.02, 0.01), "grid sizes for the porous-medium study"),
    _k("checks", "pme_t1", "float", "time", 2.0, "final Barenblatt time"),
    _k("checks", "pme_interior", "float", "-", 0.5, "interior ball as a fraction of the front radius"),
    _k("checks", "l1_order_min", "float", "-", 0.9, "minimum L1 convergence order"),
    _k("checks", "linf_order_min", "float", "-", 1.8, "minimum interior Linf convergence order"),
    _k("checks", "ab_window_lo", "float", "time", 5.0, "semi-harmonicity window start"),
    _k("checks", "ab_window_hi", "float", "time", 20.0, "semi-harmonicity window end"),
    _k("checks", "ab_tol", "float", "-", 0.02, "allowed negative margin as a fraction of P_M"),
    _k("checks", "darcy_window_lo", "float", "time", 10.0, "late-time Darcy window start"),
    _k("checks", "darcy_max", "float", "-", 0.2, "maximum median Darcy relative error"),
    _k("checks", "darcy_refine_ratio", "float", "-", 0.8, "max median Darcy error ratio h/2 to h"),
    _k("checks", "lip_window_lo", "float", "time", 5.0, "first Lipschitz window start; windows double"),
    _k("checks", "lip_region", "float", "length", None, "Lipschitz region radius (default whole grid)"),
    _k("checks", "lip_ratio", "float", "-", 1.2, "max ratio of consecutive window maxima"),
    _k("checks", "kappa_rel_tol", "float", "-", 0.2, "allowed relative change of kappa_* under refinement"),
)

SECTIONS = ("run", "model", "geometry", "initial", "solver", "lv", "checks")
_BY_NAME = {(k.section, k.name): k for k in SCHEMA}


@dataclass(frozen=True)
class RunSettings:
    experiments: tuple[Experiment, ...]
    output_dir: str


@dataclass(frozen=True)
class InitialSpec:
    kind: InitialKind
    barrier: BarrierKind
    alpha0: float
    beta0: float
    lambda0: float
    kappa0: float
    lower_alpha0: float | None
    lower_beta0: float | None
    C: float
    t0: float
    path: str | None


@dataclass(frozen=True)
class SolverSettings:
    t_end: float
    snapshot_dt: float
    cfl_safety: float
    guard_band: int


@dataclass(frozen=True)
class LVSettings:
    dt: float
    t_end: float | None


@dataclass(frozen=True)
class Checks:
    refine: bool
    C_tol: float | None
    upper_tol: float
    refine_ratio: float
    decay_R: float
    window_lo: float
    window_hi: float
    exponent_lo: float
    exponent_hi: float
    roundoff_floor: float
    lv_window_lo: float
    lv_window_hi: float
    lv_exponent_tol: float
    pme_hs: tuple[float, ...]
    pme_t1: float
    pme_interior: float
    l1_order_min: float
    linf_order_min: float
    ab_window_lo: float
    ab_window_hi: float
    ab_tol: float
    darcy_window_lo: float
    darcy_max: float
    darcy_refine_ratio: float
    lip_window_lo: float
    lip_region: float | None
    lip_ratio: float
    kappa_rel_tol: float


@dataclass(frozen=True)
class RunConfig:
    run: RunSettings
    model: ModelSpec
    geometry: GridGeom
    initial: InitialSpec
    solver: SolverSettings
    lv: LVSettings
    checks: Checks

    def sub_params(self) -> LVSubParams:
        return LVSubParams.from_model(self.model, self.geometry.n_dim, self.initial.alpha0, self.initial.beta0)

    def sup_params(self) -> LVSupParams:
        return LVSupParams.from_model(self.model, self.geometry.n_dim, self.initial.lambda0, self.initial.kappa0)

    def lower_params(self) -> LVSubParams | None:
        if self.initial.lower_alpha0 is None:
            return None
        return LVSubParams.from_model(self.model, self.geometry.n_dim,
                                      self.initial.lower_alpha0, self.initial.lower_beta0)

    def with_output_dir(self, path: str) -> "RunConfig":
        return replace(self, run=replace(self.run, output_dir=str(path)))


def _convert(key: Key, text: str):
    kind = key.kind
    if kind == "float":
        return float(text)
    if kind == "int":
        v = float(text)
        if v != int(v):
            raise ValueError("expected an integer")
        return int(v)
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError("expected true or false")
    if kind == "floats":
        return tuple(float(v) for v in text.replace(",", " ").split())
    if kind == "table":
        pairs = []
        for item in text.split(","):
            p, sep, g = item.partition(":")
            if not sep:
                raise ValueError("table entries are P:G pairs")
            pairs.append((float(p), float(g)))
        return tuple(pairs)
    if kind == "experiments":
        names = [v.strip() for v in text.split(",") if v.strip()]
        if not names:
            raise ValueError("no experiment named")
        return tuple(Experiment(v) for v in names)
    if kind.startswith("enum:"):
        choices = kind[5:].split(",")
        if text not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}")
        return text
    return text


def _scan(text: str):
    values: dict[tuple[str, str], Any] = {}
    lines: dict[tuple[str, str], int] = {}
    problems: list[tuple[str, int | None, str]] = []
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                problems.append((f"[{section}]", no, "unknown section"))
            continue
        name, sep, val = line.partition("=")
        name, val = name.strip(), val.strip()
        if not sep:
            problems.append((name, no, "expected key = value"))
            continue
        if section is None:
            problems.append((name, no, "key outside any section"))
            continue
        if section not in SECTIONS:
            continue
        key = _BY_NAME.get((section, name))
        if key is None:
            problems.append((name, no, f"unknown key in [{section}]"))
            continue
        if (section, name) in values:
            problems.append((name, no, f"duplicate key (first on line {lines[(section, name)]})"))
            continue
        try:
            values[(section, name)] = _convert(key, val)
        except ValueError as exc:
            problems.append((name, no, f"bad value {val!r}: {exc}"))
            continue
        lines[(section, name)] = no
    for key in SCHEMA:
        if key.default is REQUIRED and (key.section, key.name) not in values:
            problems.append((key.name, None, f"required key missing from [{key.section}]"))
    return values, lines, problems


def _section(cls, section, values):
    kw = {}
    for f in fields(cls):
        key = _BY_NAME[(section, f.name)]
        kw[f.name] = values.get((section, f.name), key.default)
    return kw


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem."""
    values, lines, problems = _scan(text)
    if problems:
        raise ConfigError(problems)

    def line_of(section, name):
        return lines.get((section, name))

    def get(section, name):
        return values.get((section, name), _BY_NAME[(section, name)].default)

    try:
        kind = ModelKind(get("model", "kind"))
        m = get("model", "m")
        if kind is ModelKind.TUMOR:
            model = ModelSpec.tumor(m=m, p_m=get("model", "p_m") or 1.0, p_h=get("model", "p_h"))
        elif kind is ModelKind.FISHER_KPP:
            model = ModelSpec.fisher_kpp(m=m, p_h=get("model", "p_h"))
            if get("model", "p_m") is not None and abs(get("model", "p_m") - model.p_m) > 1e-12:
                raise ConfigError([("p_m", line_of("model", "p_m"), f"fisher-kpp fixes P_M = m/(m-1) = {model.p_m:g}")])
        else:
            table = get("model", "custom_g_table")
            if table is None:
                raise ConfigError([("custom_g_table", None, "custom model needs a table")])
            model = ModelSpec.custom(m, table, p_m=get("model", "p_m"), p_h=get("model", "p_h"))
    except ConfigError:
        raise
    except (PMFrontierError, ValueError) as exc:
        raise ConfigError([("model", line_of("model", "kind"), str(exc))]) from None

    try:
        gk = GeomKind(get("geometry", "kind"))
        if gk is GeomKind.RADIAL:
            geom = GridGeom.radial(get("geometry", "h"), get("geometry", "extent"), get("geometry", "n_dim"))
        else:
            geom = GridGeom.cartesian(get("geometry", "h"), get("geometry", "extent"))
    except (PMFrontierError, ValueError) as exc:
        raise ConfigError([("geometry", line_of("geometry", "h"), str(exc))]) from None

    run = RunSettings(tuple(get("run", "experiment")), str(get("run", "output_dir")))
    ikw = _section(InitialSpec, "initial", values)
    ikw["kind"] = InitialKind(ikw["kind"])
    ikw["barrier"] = BarrierKind(ikw["barrier"])
    initial = InitialSpec(**ikw)
    solver = SolverSettings(**_section(SolverSettings, "solver", values))
    lv = LVSettings(**_section(LVSettings, "lv", values))
    checks = Checks(**_section(Checks, "checks", values))
    cfg = RunConfig(run, model, geom, initial, solver, lv, checks)
    _validate(cfg, line_of)
    return cfg


def _gate(params_fn, key, line, problems):
    try:
        params = params_fn()
    except (PMFrontierError, ValueError) as exc:
        problems.append((key, line, str(exc)))
        return
    g = check_gate(params)
    if not g.ok:
        kind = "lowini" if isinstance(params, LVSupParams) else "ini1"
        problems.append((key, line, f"{g.failed_gate()} violated ({kind} margins "
                                    f"{g.upper_margin:.6g}, {g.lower_margin:.6g})"))


def _validate(cfg: RunConfig, line_of) -> None:
    problems: list[tuple[str, int | None, str]] = []
    ini, sol = cfg.initial, cfg.solver
    if not 0 < sol.cfl_safety <= 1:
        problems.append(("cfl_safety", line_of("solver", "cfl_safety"), "must lie in (0, 1]"))
    if sol.guard_band < 2:
        problems.append(("guard_band", line_of("solver", "guard_band"), "must be at least 2 cells"))
    if not sol.t_end > 0:
        problems.append(("t_end", line_of("solver", "t_end"), "must be positive"))
    if not 0 < sol.snapshot_dt <= sol.t_end:
        problems.append(("snapshot_dt", line_of("solver", "snapshot_dt"), "must lie in (0, t_end]"))
    if ini.kind is InitialKind.BARRIER:
        if ini.barrier is BarrierKind.SUB:
            _gate(cfg.sub_params, "alpha0", line_of("initial", "alpha0") or line_of("initial", "beta0"), problems)
        else:
            _gate(cfg.sup_params, "lambda0", line_of("initial", "lambda0") or line_of("initial", "kappa0"), problems)
        if (ini.lower_alpha0 is None) != (ini.lower_beta0 is None):
            problems.append(("lower_alpha0", line_of("initial", "lower_alpha0"), "set lower_alpha0 and lower_beta0 together"))
        elif ini.lower_alpha0 is not None:
            _gate(cfg.lower_params, "lower_alpha0", line_of("initial", "lower_alpha0"), problems)
    elif ini.kind is InitialKind.BARENBLATT:
        if not ini.C > 0 or not ini.t0 > 0:
            problems.append(("C", line_of("initial", "C"), "Barenblatt needs C > 0 and t0 > 0"))
    elif ini.path is None:
        problems.append(("path", None, "table data needs a path"))
    needs = {
        Experiment.BARRIERS: "barrier", Experiment.SANDWICH_SUB: "sub", Experiment.SANDWICH_SUP: "sup",
        Experiment.DECAY: "sub", Experiment.PME_CONVERGE: "barenblatt",
    }
    for exp in cfg.run.experiments:
        want = needs.get(exp)
        if want is None:
            continue
        if want == "barenblatt" and ini.kind is not InitialKind.BARENBLATT:
            problems.append(("experiment", line_of("run", "experiment"), f"{exp.value} needs barenblatt initial data"))
        elif want in ("barrier", "sub", "sup") and ini.kind is not InitialKind.BARRIER:
            problems.append(("experiment", line_of("run", "experiment"), f"{exp.value} needs barrier initial data"))
        elif want in ("sub", "sup") and ini.barrier.value != want:
            problems.append(("experiment", line_of("run", "experiment"), f"{exp.value} needs a {want} barrier"))
    if Experiment.PME_CONVERGE in cfg.run.experiments and len(cfg.checks.pme_hs) < 3:
        problems.append(("pme_hs", line_of("checks", "pme_hs"), "need at least three grid sizes"))
    if problems:
        raise ConfigError(problems)


def _value_of(cfg: RunConfig, key: Key):
    s, n = key.section, key.name
    if s == "run":
        return ",".join(e.value for e in cfg.run.experiments) if n == "experiment" else cfg.run.output_dir
    if s == "model":
        return getattr(cfg.model, n)
    if s == "geometry":
        return getattr(cfg.geometry, n)
    obj = {"initial": cfg.initial, "solver": cfg.solver, "lv": cfg.lv, "checks": cfg.checks}[s]
    return getattr(obj, n)


def _render(key: Key, v) -> str:
    if key.kind == "floats":
        return ", ".join(fmt(x) for x in v)
    if key.kind == "table":
        return ", ".join(f"{fmt(p)}:{fmt(g)}" for p, g in v)
    return fmt(v)


def serialize(cfg: RunConfig) -> str:
    """Canonical text; ``parse_config(serialize(c)) == c``."""
    out = []
    for section in SECTIONS:
        out.append(f"[{section}]")
        for key in SCHEMA:
            if key.section != section:
                continue
            v = _value_of(cfg, key)
            if v is None:
                continue
            out.append(f"{key.name} = {_render(key, v)}")
        out.append("")
    return "\n".join(out)


def schema_help() -> str:
    """Every key with its unit and default, grouped by section."""
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for key in SCHEMA:
            if key.section != section:
                continue
            if key.default is REQUIRED:
                d = "required"
            elif key.default is None:
                d = "unset"
            elif key.kind == "floats":
                d = ", ".join(repr(float(x)) for x in key.default)
            elif key.kind == "float":
                d = repr(float(key.default))
            else:
                d = _render(key, key.default)
            lines.append(f"  {key.name} ({key.unit}; default {d}): {key.help}")
    return "\n".join(lines)
