"""Free-boundary extraction and boundary diagnostics on solver snapshots.

All functions are pure functions of :class:`~pmfrontier.grid.Field` objects.
The front of a radial field sits half a cell beyond the outermost cell whose
density exceeds ``support_eps``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import DomainError, FrontError
from .fitting import RateFit, fit_power_law
from .grid import Field, GeomKind
from .model import ModelSpec, eval_G, pressure_from_density
from .solver import discrete_laplacian

RESOLVED_CELLS = 10
VELOCITY_FLOOR = 1e-9
# The explicit degenerate stencil leaves a precursor of up to 2.5 cells
# beyond the linearly extrapolated front, plus about one rounded corner cell.
# Stencils that measure the profile start just inside this layer.
FRONT_LAYER = 4


def default_eps(spec: ModelSpec) -> float:
    return 1e-10 * spec.rho_m


def _outer_index(rho: np.ndarray, eps: float) -> int:
    idx = np.flatnonzero(rho > eps)
    return int(idx[-1]) if idx.size else -1


def support_radius(field: Field, support_eps: float) -> float:
    """Front radius: outermost occupied centre plus ``h/2``; 0 for vacuum.

    On Cartesian grids the largest occupied centre distance is used.
    """
    geom = field.geom
    if geom.kind is GeomKind.RADIAL:
        i = _outer_index(field.rho, support_eps)
        return 0.0 if i < 0 else float(geom.axis()[i] + 0.5 * geom.h)
    mask = field.rho > support_eps
    if not mask.any():
        return 0.0
    return float(geom.radii()[mask].max() + 0.5 * geom.h)


def boundary_cells(field: Field, support_eps: float) -> np.ndarray:
    """Indices of occupied cells with at least one empty 4-neighbour (Cartesian grids)."""
    if field.geom.kind is not GeomKind.CARTESIAN2D:
        raise DomainError("boundary_cells is for cartesian2d fields")
    mask = field.rho > support_eps
    inner = ndimage.binary_erosion(mask, structure=ndimage.generate_binary_structure(2, 1), border_value=0)
    return np.argwhere(mask & ~inner)


def interior_mask(field: Field, support_eps: float, margin: int) -> np.ndarray:
    """Occupied cells at least ``margin`` cells away from the free boundary.

    The symmetry axis of a radial grid is not a boundary.
    """
    mask = field.rho > support_eps
    if margin <= 0:
        return mask
    if field.geom.kind is GeomKind.RADIAL:
        padded = np.concatenate([mask[:margin][::-1], mask, np.zeros(margin, dtype=bool)])
        eroded = ndimage.binary_erosion(padded, structure=np.ones(2 * margin + 1, dtype=bool), border_value=0)
        return eroded[margin:-margin]
    st = ndimage.generate_binary_structure(2, 1)
    return ndimage.binary_erosion(mask, structure=st, iterations=margin, border_value=0)


def _pressure(field: Field, spec: ModelSpec) -> np.ndarray:
    return pressure_from_density(field.rho, spec.m)


def one_sided_front_gradient(field: Field, spec: ModelSpec, support_eps: float,
                             layer: int = FRONT_LAYER) -> float:
    """``|grad P|`` from the one-sided 3-point stencil on the 3 cells just inside the front layer."""
    if field.geom.kind is not GeomKind.RADIAL:
        raise DomainError("front gradient is defined for radial fields")
    i = _outer_index(field.rho, support_eps) - layer
    if i < 2:
        raise FrontError("fewer than 3 occupied cells")
    P = _pressure(field, spec)
    return float(abs(3.0 * P[i] - 4.0 * P[i - 1] + P[i - 2]) / (2.0 * field.geom.h))


def front_velocity(series, radius: Sequence[float] | None = None) -> np.ndarray:
    """Centred differences of the radius in time, one-sided at the ends.

    Accepts a :class:`FrontSeries` or separate ``times`` and ``radius`` arrays.
    """
    if radius is None:
        t, r = np.asarray(series.times, dtype=float), np.asarray(series.radius, dtype=float)
    else:
        t, r = np.asarray(series, dtype=float), np.asarray(radius, dtype=float)
    if t.size < 2:
        raise FrontError("front velocity needs at least 2 snapshots")
    if t.size == 2:
        v = (r[1] - r[0]) / (t[1] - t[0])
        return np.array([v, v])
    return np.gradient(r, t, edge_order=1)


@dataclass
class FrontSeries:
    times: np.ndarray
    radius: np.ndarray
    velocity: np.ndarray
    grad_P_front: np.ndarray
    darcy_rel_err: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"t": self.times, "radius": self.radius, "velocity": self.velocity,
                "grad_P_front": self.grad_P_front}
        cols["darcy_rel_err"] = self.darcy_rel_err if self.darcy_rel_err.size else np.full(self.times.shape, np.nan)
        return cols


def front_series(fields: Sequence[Field], spec: ModelSpec, support_eps: float | None = None) -> FrontSeries:
    """Radius, velocity, one-sided front gradient and Darcy error per snapshot."""
    eps = default_eps(spec) if support_eps is None else support_eps
    times = np.array([f.t for f in fields])
    radius = np.array([support_radius(f, eps) for f in fields])
    velocity = front_velocity(times, radius)
    grads = []
    for f in fields:
        try:
            grads.append(one_sided_front_gradient(f, spec, eps))
        except FrontError:
            grads.append(np.nan)
    series = FrontSeries(times, radius, velocity, np.array(grads))
    series.darcy_rel_err = darcy_consistency(series, fields, spec, eps, strict=False)
    return series


def darcy_consistency(series: FrontSeries, fields: Sequence[Field], spec: ModelSpec,
                      support_eps: float | None = None, strict: bool = True) -> np.ndarray:
    """Relative mismatch ``|V - |grad P|| / max(|V|, floor)`` per snapshot.

    Snapshots with fewer than 10 occupied cells get NaN.  With ``strict`` a
    series in which no snapshot is resolved raises :class:`FrontError`.
    """
    eps = default_eps(spec) if support_eps is None else support_eps
    out = np.full(len(fields), np.nan)
    for k, f in enumerate(fields):
        i = _outer_index(f.rho, eps)
        if i + 1 < RESOLVED_CELLS:
            continue
        grad = one_sided_front_gradient(f, spec, eps)
        v = series.velocity[k]
        out[k] = abs(v - grad) / max(abs(v), VELOCITY_FLOOR)
    if strict and np.all(np.isnan(out)):
        raise FrontError("no snapshot has a resolved front")
    return out


def ab_check(field: Field, spec: ModelSpec, support_eps: float | None = None,
             margin: int = 2 + FRONT_LAYER) -> float:
    """Minimum of ``lap_h P + G(P) + 1/((m-1) t)`` over interior occupied cells.

    The default keeps 2 cells clear of the front layer.
    """
    t = field.t
    if not t > 0:
        raise DomainError("the semi-harmonicity bound needs t > 0")
    eps = default_eps(spec) if support_eps is None else support_eps
    mask = interior_mask(field, eps, margin)
    if not mask.any():
        raise FrontError("no occupied cells away from the front")
    P = _pressure(field, spec)
    lap = discrete_laplacian(P, field.geom)
    G = eval_G(spec, np.clip(P, 0.0, spec.p_h))
    vals = lap + G + 1.0 / ((spec.m - 1.0) * t)
    return float(vals[mask].min())


def ab_bound(m: float, t):
    """The relaxation term ``1/((m-1) t)``."""
    return 1.0 / ((m - 1.0) * np.asarray(t, dtype=float))


def _grad_mag(P: np.ndarray, field: Field) -> np.ndarray:
    h = field.geom.h
    if P.ndim == 1:
        return np.abs(np.gradient(P, h))
    gx, gy = np.gradient(P, h)
    return np.hypot(gx, gy)


def _in_window(fields, window):
    lo, hi = window
    sel = [f for f in fields if lo - 1e-12 <= f.t <= hi + 1e-12]
    if len(sel) < 2:
        raise DomainError(f"window [{lo}, {hi}] holds fewer than 2 snapshots")
    return sel


def lipschitz_norms(fields: Sequence[Field], spec: ModelSpec, window: tuple[float, float],
                    region: float) -> tuple[float, float]:
    """Max ``|grad_h P|`` and max ``|dP/dt|`` over snapshots in ``window`` and cells with ``r <= region``."""
    sel = _in_window(fields, window)
    r = sel[0].geom.radii()
    inside = r <= region
    Ps = [_pressure(f, spec) for f in sel]
    space = max(float(_grad_mag(P, f)[inside].max()) for P, f in zip(Ps, sel))
    time = 0.0
    for (P0, f0), (P1, f1) in zip(zip(Ps, sel), zip(Ps[1:], sel[1:])):
        time = max(time, float((np.abs(P1 - P0) / (f1.t - f0.t))[inside].max()))
    return space, time


def lipschitz_decay_fit(fields: Sequence[Field], R0: float, window: tuple[float, float] | None = None) -> RateFit:
    """Power-law fit of ``max_{B_R0} |grad_h rho|`` against ``1 + t``."""
    ts = np.array([f.t for f in fields])
    if window is None:
        window = (float(ts.min()), float(ts.max()))
    if (1.0 + window[1]) / (1.0 + window[0]) < 10.0 * (1 - 1e-12):
        raise DomainError("Lipschitz decay fit needs a full decade of 1+t")
    inside = fields[0].geom.radii() <= R0
    y = np.array([float(_grad_mag(f.rho, f)[inside].max()) for f in fields])
    return fit_power_law(ts, y, window)


@dataclass(frozen=True)
class NondegeneracyFit:
    """Linear fit ``P ~ slope * eps + intercept`` near the front.

    ``min_ratio`` is ``min P/eps`` with ``eps`` measured from the support
    radius.  ``front_slope`` is the linear coefficient of a quadratic fit in
    ``eps``; it vanishes for profiles that leave the boundary quadratically.
    """

    slope: float
    intercept: float
    min_ratio: float
    front_slope: float
    cells: int

    @property
    def degenerate(self) -> bool:
        return not (self.slope > 0 and self.front_slope > 0.25 * self.slope)


def nondegeneracy_fit(field: Field, spec: ModelSpec, cells: int = 10,
                      support_eps: float | None = None, layer: int = FRONT_LAYER) -> NondegeneracyFit:
    """Least-squares slope of ``P`` against inward distance from the front.

    Uses ``cells`` cells (5 to 10) just inside the front layer.
    """
    if field.geom.kind is not GeomKind.RADIAL:
        raise DomainError("nondegeneracy fit is defined for radial fields")
    if not 5 <= cells <= 10:
        raise DomainError("fit uses between 5 and 10 cells")
    eps = default_eps(spec) if support_eps is None else support_eps
    i = _outer_index(field.rho, eps)
    if i + 1 < max(cells + layer, RESOLVED_CELLS):
        raise FrontError("front not resolved by enough cells")
    x = field.geom.axis()
    R = x[i] + 0.5 * field.geom.h
    idx = np.arange(i - layer - cells + 1, i - layer + 1)
    dist = R - x[idx]
    P = _pressure(field, spec)[idx]
    ones = np.ones_like(dist)
    (slope, icpt), *_ = np.linalg.lstsq(np.column_stack([dist, ones]), P, rcond=None)
    (_, lin, _), *_ = np.linalg.lstsq(np.column_stack([dist**2, dist, ones]), P, rcond=None)
    return NondegeneracyFit(float(slope), float(icpt), float(np.min(P / dist)), float(lin), cells)


def _uncovered(field: Field, R0: float, eps: float) -> float:
    inside = field.geom.radii() <= R0
    return float(np.sum(field.geom.cell_volumes()[inside & ~(field.rho > eps)]))


def t0_bracket(fields: Sequence[Field], R0: float, support_eps: float) -> tuple[float, float, float] | None:
    """``(t_before, t_first, estimate)`` for the first snapshot covering ``B_R0``.

    ``estimate`` extrapolates the uncovered volume linearly from the two
    snapshots before coverage, clamped to the bracket.  ``None`` if never
    covered.
    """
    u = [_uncovered(f, R0, support_eps) for f in fields]
    for k, val in enumerate(u):
        if val == 0.0:
            if k == 0:
                return 0.0, 0.0, 0.0
            t_lo, t_hi = fields[k - 1].t, fields[k].t
            est = t_hi
            if k >= 2 and u[k - 2] > u[k - 1]:
                rate = (u[k - 2] - u[k - 1]) / (fields[k - 1].t - fields[k - 2].t)
                est = min(max(t_lo + u[k - 1] / rate, t_lo), t_hi)
            return t_lo, t_hi, est
    return None


def detect_T0(fields: Sequence[Field], R0: float, support_eps: float) -> float | None:
    """First snapshot time at which every cell in ``B_R0`` is occupied; ``None`` if never."""
    b = t0_bracket(fields, R0, support_eps)
    return None if b is None else b[1]


_RAYS = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def cone_monotonicity_check(field: Field, R0: float, spec: ModelSpec) -> float:
    """Worst radial increase ``max (P_{i+1} - P_i)_+`` beyond ``R0``.

    Cartesian fields are checked along the axis and diagonal rays from the
    centre.
    """
    P = _pressure(field, spec)
    geom = field.geom
    if geom.kind is GeomKind.RADIAL:
        r = geom.axis()
        sel = r[:-1] > R0
        return float(np.max(np.maximum(np.diff(P)[sel], 0.0), initial=0.0))
    c = geom.cells
    worst = 0.0
    for dx, dy in _RAYS:
        ii, jj = [], []
        for k in range(c):
            i = c + k if dx > 0 else (c - 1 - k if dx < 0 else c)
            j = c + k if dy > 0 else (c - 1 - k if dy < 0 else c)
            ii.append(i)
            jj.append(j)
        vals = P[ii, jj]
        rad = geom.radii()[ii, jj]
        sel = rad[:-1] > R0
        worst = max(worst, float(np.max(np.maximum(np.diff(vals)[sel], 0.0), initial=0.0)))
    return worst


def support_erosion(fields: Sequence[Field], support_eps: float, tolerance_cells: int = 1) -> int:
    """Number of cells that leave the support between consecutive snapshots.

    A cell counts when it is occupied (``rho > support_eps``) at snapshot
    ``k``, sits more than ``tolerance_cells`` from that snapshot's front, and
    is empty (``rho == 0``) at snapshot ``k+1``.
    """
    bad = 0
    for a, b in zip(fields, fields[1:]):
        core = interior_mask(a, support_eps, tolerance_cells)
        bad += int(np.sum(core & ~(b.rho > 0)))
    return bad


def radius_drops(radius: Sequence[float], h: float) -> float:
    """Largest decrease of the front radius beyond one cell (0 when non-decreasing)."""
    r = np.asarray(radius, dtype=float)
    if r.size < 2:
        return 0.0
    return float(max(0.0, np.max(-(np.diff(r)) - h)))


@dataclass
class DiagnosticsReport:
    ab_min_margin: float
    lipschitz_space: float
    lipschitz_time: float
    nondegeneracy_slope: float
    nondegeneracy_min_ratio: float
    T0_detected: float | None
    windows: dict[str, tuple[float, float]] = field(default_factory=dict)

    def as_dict(self) -> dict[str, object]:
        out: dict[str, object] = {
            "ab_min_margin": self.ab_min_margin,
            "lipschitz_space": self.lipschitz_space,
            "lipschitz_time": self.lipschitz_time,
            "nondegeneracy_slope": self.nondegeneracy_slope,
            "nondegeneracy_min_ratio": self.nondegeneracy_min_ratio,
            "T0_detected": "not reached" if self.T0_detected is None else self.T0_detected,
        }
        for name, (lo, hi) in self.windows.items():
            out[f"window_{name}_lo"] = lo
            out[f"window_{name}_hi"] = hi
        return out
