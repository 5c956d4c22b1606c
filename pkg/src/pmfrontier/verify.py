"""Verification experiments composed from barriers, solver and frontier tools.

Each ``experiment_*`` function returns raw measurements; pass/fail decisions
live in the acceptance layer and the CLI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, FitError, GateViolation
from .fitting import FitKind, RateFit, fit_exponential, fit_power_law
from .frontier import default_eps, support_radius
from .grid import Field, GridGeom
from .lv import (Barrier, BarrierKind, LVSubParams, LVSupParams, LVTrajectory, check_gate,
                 eval_barrier, integrate, support_bound)
from .model import ModelSpec, pressure_from_density
from .solver import RunResult, SolveConfig, barrier_initial, discrete_laplacian, field_from_pressure, run

__all__ = [
    "RateFit", "FitKind", "fit_power_law", "fit_exponential",
    "barenblatt", "barenblatt_exponents", "barenblatt_support_radius", "barenblatt_field",
    "barenblatt_discrete_residual", "SandwichReport", "barrier_run", "sandwich_sub_report",
    "sandwich_sup_report", "experiment_sandwich_sub", "experiment_sandwich_sup", "calibrate_tol",
    "decay_series", "experiment_decay_rate", "barrier_decay_fit", "PMETable", "experiment_pme_convergence",
]


# Barenblatt profile

def barenblatt_exponents(n: int, m: float) -> tuple[float, float]:
    """``(a, k)`` with ``a = n/(n(m-1)+2)`` and ``k = a(m-1)/(2mn)``."""
    a = n / (n * (m - 1.0) + 2.0)
    return a, a * (m - 1.0) / (2.0 * m * n)


def barenblatt(n: int, m: float, C: float, r, t: float):
    """Self-similar porous-medium solution; returns ``(rho, P)``."""
    if not t > 0:
        raise DomainError("Barenblatt profile needs t > 0")
    if not C > 0:
        raise DomainError("C must be positive")
    a, k = barenblatt_exponents(n, m)
    r = np.asarray(r, dtype=float)
    base = np.maximum(C - k * r**2 * t ** (-2.0 * a / n), 0.0)
    rho = t**-a * base ** (1.0 / (m - 1.0))
    P = pressure_from_density(rho, m)
    return (float(rho), float(P)) if rho.ndim == 0 else (rho, P)


def barenblatt_support_radius(n: int, m: float, C: float, t):
    a, k = barenblatt_exponents(n, m)
    return math.sqrt(C / k) * np.asarray(t, dtype=float) ** (a / n)


def barenblatt_front_speed(n: int, m: float, C: float, t):
    a, _ = barenblatt_exponents(n, m)
    return a / n * barenblatt_support_radius(n, m, C, t) / np.asarray(t, dtype=float)


def barenblatt_field(geom: GridGeom, m: float, C: float, t0: float) -> Field:
    """Barenblatt density sampled at cell centres, stamped with time 0."""
    rho, _ = barenblatt(geom.n_dim, m, C, geom.radii(), t0)
    return Field(geom, rho, 0.0)


def barenblatt_discrete_residual(geom: GridGeom, m: float, C: float, t: float, dt: float = 1e-5) -> np.ndarray:
    """``rho_t - lap_h(rho^m)`` of the exact profile with a centred time difference."""
    n = geom.n_dim
    r = geom.radii()
    rho_p, _ = barenblatt(n, m, C, r, t + dt)
    rho_m_, _ = barenblatt(n, m, C, r, t - dt)
    rho, _ = barenblatt(n, m, C, r, t)
    return (rho_p - rho_m_) / (2.0 * dt) - discrete_laplacian(rho**m, geom)


# Sandwich experiments

@dataclass
class SandwichReport:
    """Raw worst-case violations; positive values are violations."""

    kind: BarrierKind
    max_lower_violation: float
    max_upper_violation: float
    tolerance_used: float
    extras: dict[str, float] = field(default_factory=dict)
    series: dict[str, np.ndarray] = field(default_factory=dict)

    def passes(self, upper_cap: float | None = None) -> bool:
        upper_cap = self.tolerance_used if upper_cap is None else upper_cap
        ok = self.max_lower_violation <= self.tolerance_used and self.max_upper_violation <= upper_cap
        for key in ("support_excess", "growth_excess", "lower_radius_deficit", "gap_floor_violation"):
            if key in self.extras:
                ok = ok and self.extras[key] <= self.extras.get(key + "_tol", self.tolerance_used)
        return ok

    def as_dict(self) -> dict[str, object]:
        out: dict[str, object] = {
            "kind": self.kind.value,
            "max_lower_violation": self.max_lower_violation,
            "max_upper_violation": self.max_upper_violation,
            "tolerance_used": self.tolerance_used,
        }
        out.update(self.extras)
        return out


def _barrier(params, t_end: float, lv_dt: float) -> Barrier:
    gate = check_gate(params)
    if not gate.ok:
        raise GateViolation(gate.failed_gate(), "barrier initial data rejected")
    return Barrier(integrate(params, t_end, lv_dt))


def barrier_run(spec: ModelSpec, geom: GridGeom, barrier: Barrier, t_end: float,
                snapshot_dt: float, cfl_safety: float = 0.2, guard_band: int = 4) -> RunResult:
    """Solver run started from the barrier sampled at ``t = 0``."""
    count = int(round(t_end / snapshot_dt))
    snaps = tuple(snapshot_dt * k for k in range(1, count))
    cfg = SolveConfig(spec, geom, t_end, snaps, cfl_safety=cfl_safety, guard_band=guard_band)
    return run(cfg, barrier_initial(geom, spec, barrier, 0.0))


def sandwich_sub_report(result: RunResult, spec: ModelSpec, barrier: Barrier, tol_h: float = 0.0) -> SandwichReport:
    """``max(Q - P)`` and ``max(P - P_M)`` over every snapshot and cell."""
    if barrier.kind is not BarrierKind.SUB:
        raise DomainError("sub report needs a sub barrier")
    r = result.config.geom.radii()
    lows, ups = [], []
    for f, P in zip(result.snapshots, result.pressures()):
        Q = eval_barrier(barrier, f.t, r)
        lows.append(float(np.max(Q - P)))
        ups.append(float(np.max(P - spec.p_m)))
    series = {"t": result.times, "lower_violation": np.array(lows), "upper_violation": np.array(ups),
              "barrier_radius": np.array([float(barrier.support_radius(t)) for t in result.times]),
              "support_radius": result.diagnostics["support_radius"]}
    return SandwichReport(BarrierKind.SUB, max(lows), max(ups), tol_h, series=series)


def sandwich_sup_report(result: RunResult, spec: ModelSpec, barrier: Barrier, tol_h: float = 0.0,
                        lower: Barrier | None = None) -> SandwichReport:
    """Compare a run against a sup barrier and, optionally, a sub barrier below it.

    ``extras`` holds the support checks: excess over ``sqrt(lambda/kappa) + h``,
    excess over the exponential radius ``R(t) + h``, the deficit below the sub
    barrier radius minus ``h``, and the gap floor
    ``(P_M - lambda(t)) - min(P_M - P)``.
    """
    if barrier.kind is not BarrierKind.SUP:
        raise DomainError("sup report needs a sup barrier")
    geom = result.config.geom
    r = geom.radii()
    h = geom.h
    eps = default_eps(spec)
    cols: dict[str, list[float]] = {k: [] for k in (
        "upper_violation", "lower_violation", "support_radius", "barrier_radius", "growth_radius",
        "lower_radius", "gap_floor_violation")}
    for f, P in zip(result.snapshots, result.pressures()):
        lam, _ = barrier.trajectory.at(f.t)
        cols["upper_violation"].append(float(np.max(P - eval_barrier(barrier, f.t, r))))
        low = -P if lower is None else eval_barrier(lower, f.t, r) - P
        cols["lower_violation"].append(float(np.max(low)))
        cols["support_radius"].append(support_radius(f, eps))
        cols["barrier_radius"].append(float(barrier.support_radius(f.t)))
        cols["growth_radius"].append(float(support_bound(barrier.params, f.t)))
        cols["lower_radius"].append(math.nan if lower is None else float(lower.support_radius(f.t)))
        cols["gap_floor_violation"].append(float((spec.p_m - lam) - np.min(spec.p_m - P)))
    series = {"t": result.times, **{k: np.array(v) for k, v in cols.items()}}
    R_num = series["support_radius"]
    extras = {
        "support_excess": float(np.max(R_num - (series["barrier_radius"] + h))), "support_excess_tol": 0.0,
        "growth_excess": float(np.max(R_num - (series["growth_radius"] + h))), "growth_excess_tol": 0.0,
        "gap_floor_violation": float(np.max(series["gap_floor_violation"])),
    }
    if lower is not None:
        extras["lower_radius_deficit"] = float(np.max(series["lower_radius"] - h - R_num))
        extras["lower_radius_deficit_tol"] = 0.0
    return SandwichReport(BarrierKind.SUP, float(np.max(series["lower_violation"])),
                          float(np.max(series["upper_violation"])), tol_h, extras, series)


def calibrate_tol(violation_h: float, h: float) -> float:
    """``C_tol = 2 violation(h) / h``: the constant in ``tol_h = C_tol h``."""
    return 2.0 * max(violation_h, 0.0) / h


def experiment_sandwich_sub(spec: ModelSpec, geom: GridGeom, params: LVSubParams, t_end: float,
                            snapshot_dt: float = 0.25, C_tol: float | None = None,
                            lv_dt: float = 1e-3) -> tuple[SandwichReport, RunResult]:
    """Sub-barrier sandwich.  Without ``C_tol`` the tolerance is calibrated from
    this very run, so the lower check is then informative only."""
    barrier = _barrier(params, t_end, lv_dt)
    result = barrier_run(spec, geom, barrier, t_end, snapshot_dt)
    rep = sandwich_sub_report(result, spec, barrier)
    c = calibrate_tol(rep.max_lower_violation, geom.h) if C_tol is None else C_tol
    rep.tolerance_used = c * geom.h
    rep.extras["C_tol"] = c
    return rep, result


def experiment_sandwich_sup(spec: ModelSpec, geom: GridGeom, params: LVSupParams, t_end: float,
                            snapshot_dt: float = 0.25, tol: float = 1e-9,
                            lower: LVSubParams | None = None,
                            lv_dt: float = 1e-3) -> tuple[SandwichReport, RunResult]:
    """Run from the sup barrier itself and check it stays below it."""
    barrier = _barrier(params, t_end, lv_dt)
    low = None if lower is None else _barrier(lower, t_end, lv_dt)
    if low is not None and np.any(eval_barrier(low, 0.0, geom.radii()) > eval_barrier(barrier, 0.0, geom.radii())):
        raise DomainError("sub barrier must lie below the sup barrier initially")
    result = barrier_run(spec, geom, barrier, t_end, snapshot_dt)
    rep = sandwich_sup_report(result, spec, barrier, tol, low)
    return rep, result


# Decay

def decay_series(result: RunResult, spec: ModelSpec, R: float) -> tuple[np.ndarray, np.ndarray]:
    """``(t, max_{B_R} (P_M - P))`` per snapshot."""
    inside = result.config.geom.radii() <= R
    if not inside.any():
        raise DomainError("ball B_R holds no cell centre")
    y = np.array([float(np.max(spec.p_m - P[inside])) for P in result.pressures()])
    return result.times, y


def experiment_decay_rate(t: Sequence[float], y: Sequence[float], window: tuple[float, float],
                          floor: float = 0.0) -> RateFit:
    """Power-law fit of the gap over ``window``.

    Samples at or below ``floor`` are roundoff and are dropped; the fitted
    window shrinks to the surviving samples and is recorded in the result.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = (t >= window[0]) & (t <= window[1]) & (y > floor)
    if sel.sum() < 2:
        raise FitError(f"insufficient window: no gap above {floor:g} in [{window[0]:g}, {window[1]:g}]")
    ts = t[sel]
    return fit_power_law(ts, y[sel], (float(ts.min()), float(ts.max())))


def barrier_decay_fit(traj: LVTrajectory, window: tuple[float, float] = (1e2, 1e4), samples: int = 200) -> RateFit:
    """Power-law fit of ``P_M - first(t)`` on log-spaced samples of the trajectory."""
    ts = np.geomspace(window[0], window[1], samples)
    a, _ = traj.at(ts)
    return fit_power_law(ts, traj.params.p_m - np.asarray(a), window)


# Porous-medium convergence

@dataclass
class PMETable:
    hs: np.ndarray
    l1: np.ndarray
    linf: np.ndarray
    linf_interior: np.ndarray
    t_final: float

    @staticmethod
    def _orders(hs, err):
        return np.log(err[:-1] / err[1:]) / np.log(hs[:-1] / hs[1:])

    @property
    def l1_orders(self) -> np.ndarray:
        return self._orders(self.hs, self.l1)

    @property
    def linf_interior_orders(self) -> np.ndarray:
        return self._orders(self.hs, self.linf_interior)

    def columns(self) -> dict[str, np.ndarray]:
        return {"h": self.hs, "l1": self.l1, "linf": self.linf, "linf_interior": self.linf_interior}


def experiment_pme_convergence(n: int, m: float, C: float, hs: Sequence[float], t0: float = 1.0,
                               t1: float = 2.0, extent: float = 6.0, interior: float = 0.5,
                               cfl_safety: float = 0.2) -> PMETable:
    """Errors against the Barenblatt profile after evolving from ``t0`` to ``t1``.

    The interior norm is taken over ``r <= interior * r_front(t1)``.
    """
    spec = ModelSpec.tumor(m=m)
    l1, linf, lin = [], [], []
    for h in hs:
        geom = GridGeom.radial(h, extent, n)
        cfg = SolveConfig(spec, geom, t1 - t0, (), cfl_safety=cfl_safety, reaction=False)
        res = run(cfg, barenblatt_field(geom, m, C, t0))
        exact, _ = barenblatt(n, m, C, geom.radii(), t1)
        err = np.abs(res.snapshots[-1].rho - exact)
        l1.append(float(np.sum(err * geom.cell_volumes())))
        linf.append(float(err.max()))
        mask = geom.radii() <= interior * barenblatt_support_radius(n, m, C, t1)
        lin.append(float(err[mask].max()))
    return PMETable(np.asarray(hs, dtype=float), np.array(l1), np.array(linf), np.array(lin), t1)

