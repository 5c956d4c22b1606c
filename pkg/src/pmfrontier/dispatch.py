"""Experiment dispatch: run what a config names, write artifacts, judge checks.

Each experiment writes into ``<output_dir>/<experiment>/``:
``series.csv`` (raw series), ``report.txt`` (flat key = value) and
``summary.txt`` (one PASS/FAIL line per check).  A run that raises writes
``failure.txt`` instead of a report.
"""
from __future__ import annotations

import math
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import frontier as fr
from . import io
from .config import Experiment, InitialKind, RunConfig
from .errors import FitError, FrontError, PMFrontierError
from .grid import Field, GeomKind, GridGeom
from .lv import Barrier, BarrierKind, _coefficients, band_table, check_invariants, integrate
from .solver import RunResult, SolveConfig, quadratic_initial, run, tabulated_initial
from .verify import (barenblatt_field, barrier_decay_fit, calibrate_tol, decay_series, experiment_decay_rate,
                     experiment_pme_convergence, sandwich_sub_report, sandwich_sup_report)

Check = tuple[str, bool, str]
BAND_RTOL = 1e-9
CONE_TOL = 1e-12


@dataclass
class Outcome:
    experiment: Experiment
    checks: list[Check] = field(default_factory=list)
    report: dict[str, object] = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and all(ok for _, ok, _ in self.checks)


class Dispatcher:
    """Runs experiments for one config, sharing solver runs between them."""

    def __init__(self, cfg: RunConfig, runs: dict[float, RunResult] | None = None):
        """``runs`` seeds the cache, keyed by ``h``, with solves already made for
        this config at its own or its refined grid."""
        self.cfg = cfg
        self._runs: dict[float, RunResult] = {}
        allowed = {g.h: g for g in (self.geometry(), self.geometry(refine=True))}
        for h, res in (runs or {}).items():
            if allowed.get(h) != res.config.geom or res.config.t_end != cfg.solver.t_end:
                raise ValueError(f"seeded run at h = {h:g} does not match the config grid or horizon")
            self._runs[h] = res

    # runs

    def geometry(self, refine: bool = False) -> GridGeom:
        g = self.cfg.geometry
        if not refine:
            return g
        if g.kind is GeomKind.RADIAL:
            return GridGeom.radial(g.h / 2, g.extent, g.n_dim)
        return GridGeom.cartesian(g.h / 2, g.extent)

    def initial_field(self, geom: GridGeom) -> Field:
        ini, spec = self.cfg.initial, self.cfg.model
        if ini.kind is InitialKind.BARRIER:
            if ini.barrier is BarrierKind.SUB:
                return quadratic_initial(geom, spec, ini.alpha0, ini.beta0)
            return quadratic_initial(geom, spec, ini.lambda0, ini.kappa0)
        if ini.kind is InitialKind.BARENBLATT:
            return barenblatt_field(geom, spec.m, ini.C, ini.t0)
        return tabulated_initial(geom, ini.path)

    def solve(self, refine: bool = False) -> RunResult:
        geom = self.geometry(refine)
        if geom.h not in self._runs:
            s = self.cfg.solver
            count = int(round(s.t_end / s.snapshot_dt))
            snaps = tuple(s.snapshot_dt * k for k in range(1, count))
            sc = SolveConfig(self.cfg.model, geom, s.t_end, snaps, s.cfl_safety, s.guard_band)
            self._runs[geom.h] = run(sc, self.initial_field(geom))
        return self._runs[geom.h]

    def barrier(self, kind: BarrierKind | None = None, horizon: float | None = None) -> Barrier:
        kind = self.cfg.initial.barrier if kind is None else kind
        params = self.cfg.sub_params() if kind is BarrierKind.SUB else self.cfg.sup_params()
        return Barrier(integrate(params, self.cfg.solver.t_end if horizon is None else horizon, self.cfg.lv.dt))

    # experiments

    def execute(self, exp: Experiment, root: Path) -> Outcome:
        out = Outcome(exp)
        target = root / exp.value
        target.mkdir(parents=True, exist_ok=True)
        for stale in ("failure.txt", "report.txt", "summary.txt"):
            (target / stale).unlink(missing_ok=True)
        try:
            getattr(self, "_" + exp.value.replace("-", "_"))(out, target)
        except PMFrontierError as exc:
            out.error = str(exc)
            io.write_report(target / "failure.txt", {
                "experiment": exp.value, "status": "error", "error_type": type(exc).__name__,
                "message": str(exc)})
            io.write_summary(target / "summary.txt", exp.value, [("run", False, str(exc))])
            return out
        except Exception as exc:  # noqa: BLE001 - recorded, then re-raised by the CLI status
            out.error = f"{type(exc).__name__}: {exc}"
            io.write_report(target / "failure.txt", {
                "experiment": exp.value, "status": "error", "error_type": type(exc).__name__,
                "message": str(exc), "trace": traceback.format_exc().strip().splitlines()[-1]})
            io.write_summary(target / "summary.txt", exp.value, [("run", False, out.error)])
            return out
        for name, ok, detail in out.checks:
            out.report[f"check.{name}"] = ok
        out.report["status"] = "pass" if out.ok else "fail"
        io.write_report(target / "report.txt", out.report)
        io.write_summary(target / "summary.txt", exp.value, out.checks)
        return out

    def _support_checks(self, out: Outcome, res: RunResult, tag: str = "") -> None:
        eps = fr.default_eps(self.cfg.model)
        bad = fr.support_erosion(res.snapshots, eps)
        drop = fr.radius_drops(res.diagnostics["support_radius"], res.config.geom.h)
        out.report[f"support_erosion_cells{tag}"] = bad
        out.report[f"support_radius_drop{tag}"] = drop
        out.checks.append((f"support_monotone{tag}", bad == 0 and drop == 0.0,
                           f"{bad} cells left the support, radius drop beyond one cell {drop:.3g}"))

    def _simulate(self, out: Outcome, target: Path) -> None:
        res = self.solve()
        io.write_csv(target / "series.csv", res.diagnostics)
        last = res.snapshots[-1]
        io.write_matrix(target / "final_density.txt", last.rho if last.rho.ndim == 2 else last.rho[None, :],
                        {**res.config.geom.header(), "t": last.t})
        if res.config.geom.kind is GeomKind.RADIAL:
            io.write_csv(target / "front.csv", fr.front_series(res.snapshots, self.cfg.model).columns())
        out.report.update({"steps": res.steps, "t_end": last.t, "mass_final": last.mass(),
                           "support_radius_final": float(res.diagnostics["support_radius"][-1])})
        self._support_checks(out, res)

    def _barriers(self, out: Outcome, target: Path) -> None:
        horizon = self.cfg.lv.t_end or self.cfg.solver.t_end
        b = self.barrier(horizon=horizon)
        traj = b.trajectory
        if traj.kind is BarrierKind.SUB:
            check_invariants(traj)
        every = max(1, len(traj.times) // 20000)
        thin = traj.thin(every)
        io.write_csv(target / "series.csv", {"t": thin.times, "first": thin.first, "second": thin.second})
        bands = band_table(traj)
        io.write_csv(target / "bands.csv", {k: np.asarray(v)[::every] for k, v in bands.items()})
        _, c_lo, c_hi, _ = _coefficients(traj.params)
        a, c = traj.first, traj.second
        pm = traj.params.p_m

        def within(name, lo, x, hi):
            slack = min(float(np.min(x - lo + BAND_RTOL * np.abs(lo))), float(np.min(hi - x + BAND_RTOL * np.abs(hi))))
            out.report[f"band_slack.{name}"] = slack
            out.checks.append((f"band.{name}", slack >= 0, f"minimum slack {slack:.3g}"))

        if traj.kind is BarrierKind.SUB:
            within("beta", bands["beta_low"], c, bands["beta_high"])
            within("gap", bands["gap_low"], pm - a, bands["gap_high"])
            out.checks.append(("band.first_line", bool(np.all(a + c_lo * c <= bands["f1_upper"] * (1 + BAND_RTOL))),
                               "alpha + c_lo beta below its logistic bound"))
            out.checks.append(("band.second_line", bool(np.all(a + c_hi * c >= bands["f2_lower"] * (1 - BAND_RTOL))),
                               "alpha + c_hi beta above its logistic bound"))
            lo, hi = self.cfg.checks.lv_window_lo, self.cfg.checks.lv_window_hi
            if horizon >= hi:
                fit = barrier_decay_fit(traj, (lo, hi))
                out.report.update({f"decay.{k}": v for k, v in fit.as_dict().items()})
                tol = self.cfg.checks.lv_exponent_tol
                out.checks.append(("barrier_decay_exponent", abs(fit.exponent_or_rate + 1.0) <= tol,
                                   f"exponent {fit.exponent_or_rate:.6f} on [{lo:g}, {hi:g}], target -1 +/- {tol:g}"))
        else:
            within("ratio", bands["ratio_low"], a / c, bands["ratio_high"])
            within("kappa", bands["kappa_low"], c, bands["kappa_high"])
            within("gap", bands["gap_low"], pm - a, bands["gap_high"])
        out.report.update({"kind": traj.kind.value, "t_end": traj.t_end, "dt": traj.dt, "samples": len(traj.times)})

    def _sandwich_sub(self, out: Outcome, target: Path) -> None:
        ch = self.cfg.checks
        spec = self.cfg.model
        b = self.barrier(BarrierKind.SUB)
        res = self.solve()
        rep = sandwich_sub_report(res, spec, b)
        h = res.config.geom.h
        c_tol = calibrate_tol(rep.max_lower_violation, h) if ch.C_tol is None else ch.C_tol
        rep.tolerance_used = c_tol * h
        io.write_csv(target / "series.csv", rep.series)
        out.report.update({"C_tol": c_tol, "C_tol_source": "calibrated" if ch.C_tol is None else "config"})
        out.report.update(rep.as_dict())
        out.checks.append(("lower_sandwich", rep.max_lower_violation <= rep.tolerance_used,
                           f"max(Q - P) = {rep.max_lower_violation:.3g}, tol_h = {rep.tolerance_used:.3g}"))
        out.checks.append(("upper_bound", rep.max_upper_violation <= ch.upper_tol,
                           f"max(P - P_M) = {rep.max_upper_violation:.3g}, allowed {ch.upper_tol:g}"))
        self._support_checks(out, res)
        if ch.refine:
            res2 = self.solve(refine=True)
            rep2 = sandwich_sub_report(res2, spec, b)
            io.write_csv(target / "series_refined.csv", rep2.series)
            v1, v2 = max(rep.max_lower_violation, 0.0), max(rep2.max_lower_violation, 0.0)
            out.report.update({"refined.max_lower_violation": rep2.max_lower_violation,
                               "refined.max_upper_violation": rep2.max_upper_violation})
            out.checks.append(("refinement", v2 <= ch.refine_ratio * v1,
                               f"violation {v1:.3g} at h, {v2:.3g} at h/2, allowed ratio {ch.refine_ratio:g}"))
            out.checks.append(("upper_bound_refined", rep2.max_upper_violation <= ch.upper_tol,
                               f"max(P - P_M) = {rep2.max_upper_violation:.3g} at h/2"))
            self._support_checks(out, res2, "_refined")

    def _sandwich_sup(self, out: Outcome, target: Path) -> None:
        ch = self.cfg.checks
        spec = self.cfg.model
        b = self.barrier(BarrierKind.SUP)
        lower_p = self.cfg.lower_params()
        lower = None if lower_p is None else Barrier(integrate(lower_p, self.cfg.solver.t_end, self.cfg.lv.dt))
        res = self.solve()
        tol = ch.upper_tol if ch.C_tol is None else ch.C_tol * res.config.geom.h
        rep = sandwich_sup_report(res, spec, b, tol, lower)
        io.write_csv(target / "series.csv", rep.series)
        out.report.update(rep.as_dict())
        out.checks.append(("below_sup_barrier", rep.max_upper_violation <= tol,
                           f"max(P - S) = {rep.max_upper_violation:.3g}, tol {tol:.3g}"))
        out.checks.append(("support_within_barrier", rep.extras["support_excess"] <= 0,
                           f"max(R_num - sqrt(lambda/kappa) - h) = {rep.extras['support_excess']:.3g}"))
        out.checks.append(("support_within_growth_radius", rep.extras["growth_excess"] <= 0,
                           f"max(R_num - R(t) - h) = {rep.extras['growth_excess']:.3g}"))
        out.checks.append(("gap_floor", rep.extras["gap_floor_violation"] <= tol,
                           f"max((P_M - lambda) - min(P_M - P)) = {rep.extras['gap_floor_violation']:.3g}"))
        if lower is not None:
            out.checks.append(("above_sub_barrier", rep.max_lower_violation <= tol,
                               f"max(Q - P) = {rep.max_lower_violation:.3g}"))
            out.checks.append(("support_above_sub_radius", rep.extras["lower_radius_deficit"] <= 0,
                               f"max(sqrt(alpha/beta) - h - R_num) = {rep.extras['lower_radius_deficit']:.3g}"))
        self._support_checks(out, res)

    def _decay(self, out: Outcome, target: Path) -> None:
        ch = self.cfg.checks
        res = self.solve()
        t, y = decay_series(res, self.cfg.model, ch.decay_R)
        io.write_csv(target / "series.csv", {"t": t, "gap": y, "scaled_gap": (1.0 + t) * y,
                                             "support_radius": res.diagnostics["support_radius"]})
        sel = (t >= ch.window_lo) & (t <= ch.window_hi) & (y > ch.roundoff_floor)
        out.report.update({"window_lo": ch.window_lo, "window_hi": ch.window_hi,
                           "roundoff_floor": ch.roundoff_floor, "samples_above_floor": int(sel.sum())})
        if sel.any():
            out.report["max_scaled_gap_in_window"] = float(np.max(((1.0 + t) * y)[sel]))
        self._support_checks(out, res)
        try:
            fit = experiment_decay_rate(t, y, (ch.window_lo, ch.window_hi), ch.roundoff_floor)
        except FitError as exc:
            out.checks.append(("decay_exponent", False, str(exc)))
            return
        out.report.update({f"fit.{k}": v for k, v in fit.as_dict().items()})
        lo, hi = fit.window
        decade = hi >= 10.0 * lo
        e = fit.exponent_or_rate
        out.checks.append(("decay_exponent", ch.exponent_lo <= e <= ch.exponent_hi and decade,
                           f"exponent {e:.4g} on [{lo:g}, {hi:g}] ({'full' if decade else 'less than one'} decade), "
                           f"target [{ch.exponent_lo:g}, {ch.exponent_hi:g}], fit {fit.flag}"))

    def _pme_converge(self, out: Outcome, target: Path) -> None:
        ch, ini, g = self.cfg.checks, self.cfg.initial, self.cfg.geometry
        tab = experiment_pme_convergence(g.n_dim, self.cfg.model.m, ini.C, ch.pme_hs, ini.t0, ch.pme_t1,
                                         g.extent, ch.pme_interior, self.cfg.solver.cfl_safety)
        io.write_csv(target / "series.csv", tab.columns())
        l1o, lio = tab.l1_orders, tab.linf_interior_orders
        out.report.update({"t0": ini.t0, "t1": ch.pme_t1})
        for k, (a, b) in enumerate(zip(l1o, lio)):
            out.report[f"l1_order_{k}"] = float(a)
            out.report[f"linf_interior_order_{k}"] = float(b)
        out.checks.append(("l1_order", bool(np.min(l1o) >= ch.l1_order_min),
                           f"orders {', '.join(f'{v:.3f}' for v in l1o)}, minimum {ch.l1_order_min:g}"))
        out.checks.append(("linf_interior_order", bool(np.min(lio) >= ch.linf_order_min),
                           f"orders {', '.join(f'{v:.3f}' for v in lio)}, minimum {ch.linf_order_min:g}"))
        out.checks.append(("l1_decreasing", bool(np.all(np.diff(tab.l1) < 0)), "L1 error decreases with h"))

    def _diagnose(self, res: RunResult) -> dict[str, object]:
        ch, spec = self.cfg.checks, self.cfg.model
        eps = fr.default_eps(spec)
        snaps = res.snapshots
        R0 = fr.support_radius(snaps[0], eps)
        T0 = fr.detect_T0(snaps, R0, eps)
        series = fr.front_series(snaps, spec, eps)
        ab = [fr.ab_check(f, spec, eps) for f in snaps if ch.ab_window_lo <= f.t <= ch.ab_window_hi]
        late = series.times >= ch.darcy_window_lo
        darcy = float(np.nanmedian(series.darcy_rel_err[late])) if np.any(late) else math.nan
        start = max(ch.lip_window_lo, T0 or 0.0) if T0 is not None else math.nan
        region = ch.lip_region if ch.lip_region is not None else res.config.geom.extent
        windows, norms = [], []
        w = start
        while not math.isnan(w) and 2 * w <= res.config.t_end + 1e-12:
            windows.append((w, 2 * w))
            norms.append(fr.lipschitz_norms(snaps, spec, (w, 2 * w), region))
            w *= 2
        nd = fr.nondegeneracy_fit(snaps[-1], spec)
        cone = max(fr.cone_monotonicity_check(f, R0, spec) for f in snaps)
        return {"R0": R0, "T0": T0, "series": series, "ab": min(ab) if ab else math.nan, "darcy": darcy,
                "windows": windows, "norms": norms, "nd": nd, "cone": cone}

    def _frontier_diag(self, out: Outcome, target: Path) -> None:
        ch, spec = self.cfg.checks, self.cfg.model
        if self.cfg.geometry.kind is not GeomKind.RADIAL:
            raise FrontError("frontier diagnostics need a radial grid")
        res = self.solve()
        d = self._diagnose(res)
        io.write_csv(target / "series.csv", d["series"].columns())
        rep = fr.DiagnosticsReport(d["ab"], max((n[0] for n in d["norms"]), default=math.nan),
                                   max((n[1] for n in d["norms"]), default=math.nan),
                                   d["nd"].slope, d["nd"].min_ratio, d["T0"],
                                   {f"lip{k}": w for k, w in enumerate(d["windows"])})
        out.report.update(rep.as_dict())
        out.report.update({"R0": d["R0"], "darcy_median_late": d["darcy"], "cone_violation": d["cone"],
                           "nondegeneracy_front_slope": d["nd"].front_slope})
        for k, ((w0, w1), (gs, gt)) in enumerate(zip(d["windows"], d["norms"])):
            out.report[f"lip{k}_space"] = gs
            out.report[f"lip{k}_time"] = gt
        pm = spec.p_m
        out.checks.append(("ab_margin", d["ab"] >= -ch.ab_tol * pm,
                           f"min margin {d['ab']:.4g} on [{ch.ab_window_lo:g}, {ch.ab_window_hi:g}], "
                           f"allowed {-ch.ab_tol * pm:g}"))
        out.checks.append(("darcy", d["darcy"] <= ch.darcy_max,
                           f"median relative error {d['darcy']:.4g} for t >= {ch.darcy_window_lo:g}"))
        ok_lip = len(d["norms"]) >= 2
        detail = []
        for (a, b) in zip(d["norms"], d["norms"][1:]):
            ok_lip = ok_lip and b[0] <= ch.lip_ratio * a[0] and b[1] <= ch.lip_ratio * a[1]
            detail.append(f"{b[0] / a[0]:.3f}/{b[1] / a[1]:.3f}")
        out.checks.append(("lipschitz_windows", ok_lip,
                           f"space/time ratios {', '.join(detail) or 'none'} over windows "
                           f"{', '.join(f'[{a:g}, {b:g}]' for a, b in d['windows'])}"))
        out.checks.append(("nondegeneracy", d["nd"].slope > 0 and not d["nd"].degenerate,
                           f"kappa_* = {d['nd'].slope:.4g}, min P/eps = {d['nd'].min_ratio:.4g}"))
        out.checks.append(("cone_monotone", d["cone"] <= CONE_TOL, f"max radial increase {d['cone']:.3g}"))
        self._support_checks(out, res)
        if ch.refine:
            res2 = self.solve(refine=True)
            d2 = self._diagnose(res2)
            io.write_csv(target / "series_refined.csv", d2["series"].columns())
            neg1, neg2 = max(0.0, -d["ab"]), max(0.0, -d2["ab"])
            out.report.update({"refined.ab_min_margin": d2["ab"], "refined.darcy_median_late": d2["darcy"],
                               "refined.nondegeneracy_slope": d2["nd"].slope})
            out.checks.append(("ab_refinement", d2["ab"] >= -ch.ab_tol * pm and neg2 <= 0.5 * neg1,
                               f"margin {d['ab']:.4g} at h, {d2['ab']:.4g} at h/2"))
            ratio = d2["darcy"] / d["darcy"] if d["darcy"] > 0 else math.inf
            out.checks.append(("darcy_refinement", ratio <= ch.darcy_refine_ratio and d2["darcy"] <= ch.darcy_max,
                               f"median error {d['darcy']:.4g} at h, {d2['darcy']:.4g} at h/2 (ratio {ratio:.3f})"))
            k1, k2 = d["nd"].slope, d2["nd"].slope
            rel = abs(k2 - k1) / abs(k1) if k1 else math.inf
            out.checks.append(("kappa_refinement", k2 > 0 and rel <= ch.kappa_rel_tol,
                               f"kappa_* {k1:.4g} at h, {k2:.4g} at h/2 (change {rel:.3f})"))
            self._support_checks(out, res2, "_refined")


def dispatch(cfg: RunConfig, root: Path | None = None) -> list[Outcome]:
    """Run every experiment in ``cfg`` sequentially with shared solver runs."""
    root = Path(cfg.run.output_dir if root is None else root)
    d = Dispatcher(cfg)
    return [d.execute(exp, root) for exp in cfg.run.experiments]
