"""Explicit finite-difference solver for ``rho_t = lap(rho^m) + rho g(rho)``.

The stencil acts on ``u = rho^m`` in conservative flux form.  Under the
time-step limit of :func:`stable_dt` the update is monotone in every stencil
argument, so ordered initial data stay ordered; the barrier comparisons in
:mod:`pmfrontier.verify` rely on exactly this property.

Outer boundaries are zero-flux.  Runs must keep the support away from them:
the outermost ``guard_band`` cells have to remain empty, otherwise
:class:`DomainTooSmall` is raised.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DomainError, DomainTooSmall, InstabilityError
from .grid import Field, GeomKind, GridGeom
from .model import ModelKind, ModelSpec, density_from_pressure, pressure_from_density

NEG_TOL = 1e-13


def _pow(x: np.ndarray, p: float) -> np.ndarray:
    # exact for the common m = 2 case so numpy and the kernels agree bitwise
    if p == 2.0:
        return x * x
    if p == 1.0:
        return x.copy()
    return x**p


def model_code(spec: ModelSpec, reaction: bool = True):
    """Flat encoding of the reaction model understood by the kernels."""
    if not reaction:
        return K.NONE, np.zeros(2), np.zeros(2)
    if spec.kind is ModelKind.TUMOR:
        return K.TUMOR, np.zeros(2), np.zeros(2)
    if spec.kind is ModelKind.FISHER_KPP:
        return K.FISHER, np.zeros(2), np.zeros(2)
    ps, gs = spec.table_arrays
    return K.TABLE, ps, gs


def reaction_term(rho: np.ndarray, spec: ModelSpec, reaction: bool = True) -> np.ndarray:
    """``rho * g(rho)`` without domain checks (the solver may overshoot P_H by roundoff)."""
    if not reaction:
        return np.zeros_like(rho)
    m = spec.m
    if spec.kind is ModelKind.TUMOR:
        # written so that g(rho_M) is exactly zero
        g = m / (m - 1.0) * (_pow(np.asarray(spec.rho_m), m - 1.0) - _pow(rho, m - 1.0))
    elif spec.kind is ModelKind.FISHER_KPP:
        g = 1.0 - rho
    else:
        ps, gs = spec.table_arrays
        g = np.interp(m / (m - 1.0) * _pow(rho, m - 1.0), ps, gs)
    return rho * g


def _radial_weights(geom: GridGeom) -> tuple[np.ndarray, np.ndarray]:
    return K.radial_weights(geom.cells, geom.h, geom.n_dim)


def radial_laplacian(u: np.ndarray, geom: GridGeom) -> np.ndarray:
    """Conservative ``r^{1-n} (r^{n-1} u_r)_r`` with zero flux at ``r = 0`` and the outer face."""
    wl, wr = _radial_weights(geom)
    up = np.empty(u.size + 1)
    up[:-1] = u
    up[-1] = u[-1]
    um = np.empty(u.size + 1)
    um[1:] = u
    um[0] = u[0]
    return wr * (up[1:] - u) - wl * (u - um[:-1])


def cartesian_laplacian(u: np.ndarray, h: float) -> np.ndarray:
    """Standard ``2d+1``-point Laplacian in any number of dimensions, zero-flux edges."""
    out = np.zeros_like(u, dtype=float)
    for ax in range(u.ndim):
        padded = np.pad(u, [(1, 1) if a == ax else (0, 0) for a in range(u.ndim)], mode="edge")
        lo = np.take(padded, range(0, u.shape[ax]), axis=ax)
        hi = np.take(padded, range(2, u.shape[ax] + 2), axis=ax)
        out += (hi - u) - (u - lo)
    return out / h**2


def discrete_laplacian(u: np.ndarray, geom: GridGeom) -> np.ndarray:
    if geom.kind is GeomKind.RADIAL:
        return radial_laplacian(u, geom)
    return cartesian_laplacian(u, geom.h)


def laplacian_of_power(field: Field, m: float) -> np.ndarray:
    """Discrete ``lap(rho^m)`` on the field's grid."""
    return discrete_laplacian(_pow(field.rho, m), field.geom)


def stable_dt(field: Field, spec: ModelSpec, cfl_safety: float = 0.2, reaction: bool = True) -> float:
    """Largest step keeping the explicit update monotone, times ``cfl_safety``.

    ``dt = s * min(h^2 / (2 k max(m rho^{m-1})), 1 / max(|g| + |rho g'|))``
    with ``k = 2`` on Cartesian grids and ``k = n`` on radial ones.  A vacuum
    field returns ``s * h^2``.
    """
    if not 0 < cfl_safety <= 1:
        raise DomainError("cfl_safety must lie in (0, 1]")
    code, ps, gs = model_code(spec, reaction)
    geom = field.geom
    return float(K.stable_dt_flat(field.rho.ravel(), geom.h, float(geom.dim_factor), spec.m,
                                  cfl_safety, code, spec.rho_m, ps, gs))


def check_guard(field: Field, guard_band: int) -> None:
    """Raise :class:`DomainTooSmall` if any of the outer ``guard_band`` cells is occupied."""
    if guard_band <= 0:
        return
    rho = field.rho
    g = guard_band
    if field.geom.kind is GeomKind.RADIAL:
        band = rho[-g:]
    else:
        band = np.concatenate([rho[:g].ravel(), rho[-g:].ravel(), rho[:, :g].ravel(), rho[:, -g:].ravel()])
    if np.any(band > 0):
        from .frontier import support_radius

        raise DomainTooSmall(field.t, support_radius(field, 0.0))


def step(field: Field, spec: ModelSpec, dt: float, reaction: bool = True, guard_band: int = 0) -> Field:
    """One forward-Euler step.

    Values in ``[-1e-13, 0)`` are clamped to zero; anything more negative, or
    NaN, raises :class:`InstabilityError`.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    check_guard(field, guard_band)
    rho = field.rho
    new = rho + dt * (laplacian_of_power(field, spec.m) + reaction_term(rho, spec, reaction))
    if np.any(np.isnan(new)) or np.any(new < -NEG_TOL):
        raise InstabilityError(f"explicit update went negative (min {np.nanmin(new):.3e}) at t={field.t:.6g}")
    new = np.where(new > 0, new, 0.0)
    return field.with_rho(new, field.t + dt)


def pressure_field(field: Field, spec: ModelSpec) -> np.ndarray:
    """Cellwise pressure of the density field."""
    return pressure_from_density(field.rho, spec.m)


@dataclass(frozen=True)
class SolveConfig:
    spec: ModelSpec
    geom: GridGeom
    t_end: float
    snapshot_times: tuple[float, ...] = ()
    cfl_safety: float = 0.2
    guard_band: int = 4
    reaction: bool = True

    def __post_init__(self):
        if self.t_end < 0:
            raise DomainError("t_end must be non-negative")
        times = tuple(sorted(float(t) for t in self.snapshot_times))
        if any(t < 0 or t > self.t_end for t in times):
            raise DomainError("snapshot_times must lie in [0, t_end]")
        object.__setattr__(self, "snapshot_times", times)
        if self.guard_band < 2:
            raise DomainError("guard_band must be at least 2 cells")
        if not 0 < self.cfl_safety <= 1:
            raise DomainError("cfl_safety must lie in (0, 1]")

    def output_times(self) -> list[float]:
        return sorted({0.0, *self.snapshot_times, float(self.t_end)})


@dataclass(eq=False)
class RunResult:
    snapshots: list[Field]
    steps: int
    config: SolveConfig
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.snapshots])

    def pressures(self) -> list[np.ndarray]:
        return [pressure_field(f, self.config.spec) for f in self.snapshots]


def _diagnostics(snaps: list[Field], spec: ModelSpec, support_eps: float) -> dict[str, np.ndarray]:
    from .frontier import support_radius

    out = {
        "t": np.array([f.t for f in snaps]),
        "mass": np.array([f.mass() for f in snaps]),
        "max_rho": np.array([float(f.rho.max()) for f in snaps]),
    }
    if snaps and snaps[0].geom.kind is GeomKind.RADIAL:
        out["support_radius"] = np.array([support_radius(f, support_eps) for f in snaps])
    else:
        out["support_radius"] = np.array([_cartesian_radius(f, support_eps) for f in snaps])
    return out


def _cartesian_radius(f: Field, eps: float) -> float:
    mask = f.rho > eps
    if not mask.any():
        return 0.0
    return float(f.geom.radii()[mask].max() + 0.5 * f.geom.h)


def run(config: SolveConfig, initial: Field) -> RunResult:
    """Integrate to ``t_end``, recomputing the stable step every step.

    The step before each output time is shortened so snapshots land exactly
    on the requested times.  Radial grids use the compiled kernel; Cartesian
    grids use :func:`step` directly.
    """
    if initial.geom != config.geom:
        raise DomainError("initial field lives on a different grid")
    spec = config.spec
    check_guard(initial, config.guard_band)
    snaps = [initial.with_rho(initial.rho.copy(), 0.0)]
    total_steps = 0
    times = [t for t in config.output_times() if t > 0]
    current = snaps[0]
    if config.geom.kind is GeomKind.RADIAL:
        code, ps, gs = model_code(spec, config.reaction)
        rho = current.rho.copy()
        t = 0.0
        geom = config.geom
        for t_out in times:
            t, steps, status = K.advance_radial(rho, t, t_out, geom.h, float(geom.n_dim), spec.m,
                                                config.cfl_safety, code, spec.rho_m, ps, gs, config.guard_band)
            total_steps += steps
            if status == 1:
                raise InstabilityError(f"explicit update went negative or NaN near t={t:.6g}")
            if status == 2:
                from .frontier import support_radius

                raise DomainTooSmall(t, support_radius(Field(geom, rho.copy(), t), 0.0))
            snaps.append(Field(geom, rho.copy(), t_out))
    else:
        for t_out in times:
            while current.t < t_out:
                dt = stable_dt(current, spec, config.cfl_safety, config.reaction)
                last = current.t + dt >= t_out
                if last:
                    dt = t_out - current.t
                current = step(current, spec, dt, config.reaction, config.guard_band)
                if last:
                    current = current.with_rho(current.rho, t_out)
                total_steps += 1
            check_guard(current, config.guard_band)
            snaps.append(current)
    support_eps = 1e-10 * spec.rho_m
    return RunResult(snaps, total_steps, config, _diagnostics(snaps, spec, support_eps))


def field_from_pressure(geom: GridGeom, P: np.ndarray, m: float, t: float = 0.0) -> Field:
    return Field(geom, density_from_pressure(np.clip(P, 0.0, None), m), t)


def barrier_initial(geom: GridGeom, spec: ModelSpec, barrier, t: float = 0.0) -> Field:
    """Density whose pressure is the barrier sampled at cell centres."""
    from .lv import eval_barrier

    return field_from_pressure(geom, eval_barrier(barrier, t, geom.radii()), spec.m, t)


def quadratic_initial(geom: GridGeom, spec: ModelSpec, a: float, b: float) -> Field:
    """Density with pressure ``(a - b r^2)_+``."""
    return field_from_pressure(geom, np.maximum(a - b * geom.radii() ** 2, 0.0), spec.m)


def tabulated_initial(geom: GridGeom, path) -> Field:
    """Density read from a text file.

    Radial grids accept two columns ``r rho`` (interpolated onto the cell
    centres, zero beyond the last row) or a single column of cell values.
    Cartesian grids expect a dense matrix with one row per line.
    """
    data = np.loadtxt(path, delimiter=None, comments="#", ndmin=2)
    if geom.kind is GeomKind.RADIAL:
        if data.shape[1] == 2:
            rho = np.interp(geom.axis(), data[:, 0], data[:, 1], right=0.0)
        elif data.shape[1] == 1 and data.shape[0] == geom.cells:
            rho = data[:, 0]
        else:
            raise DomainError("radial table needs columns 'r rho' or one value per cell")
    else:
        if data.shape != geom.shape:
            raise DomainError(f"matrix shape {data.shape} does not match grid {geom.shape}")
        rho = data
    return Field(geom, np.clip(rho, 0.0, None))
