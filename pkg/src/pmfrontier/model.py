"""Reaction nonlinearities, density/pressure conversion and structural constants.

The pressure of a density ``rho`` is ``P = m/(m-1) * rho**(m-1)`` and the
reaction term is written in pressure form, ``G(P) = g(rho)``.  Two built-in
models are provided (tumor growth ``G(P) = P_M - P`` and Fisher-KPP
``g(rho) = 1 - rho``) plus a monotone piecewise-linear table.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SingularityError

_REL_TOL = 1e-12


class ModelKind(str, enum.Enum):
    TUMOR = "tumor"
    FISHER_KPP = "fisher-kpp"
    CUSTOM = "custom"


class Flag(str, enum.Enum):
    """Marks a structural constant that does not exist as a positive real."""

    VIOLATED = "violated"
    UNBOUNDED = "unbounded"


def pressure_from_density(rho, m: float):
    """Pressure ``m/(m-1) rho^(m-1)``; works on scalars and arrays."""
    if not m > 1:
        raise DomainError(f"diffusion exponent must exceed 1, got m={m}")
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("density must be non-negative")
    out = m / (m - 1.0) * arr ** (m - 1.0)
    return float(out) if out.ndim == 0 else out


def density_from_pressure(P, m: float):
    """Inverse of :func:`pressure_from_density`."""
    if not m > 1:
        raise DomainError(f"diffusion exponent must exceed 1, got m={m}")
    arr = np.asarray(P, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("pressure must be non-negative")
    out = ((m - 1.0) / m * arr) ** (1.0 / (m - 1.0))
    return float(out) if out.ndim == 0 else out


def _fisher_coeffs(m: float) -> tuple[float, float]:
    # -G'(P) = c * P**e for g(rho) = 1 - rho
    c = (1.0 / (m - 1.0)) * ((m - 1.0) / m) ** (1.0 / (m - 1.0))
    e = (2.0 - m) / (m - 1.0)
    return c, e


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of the reaction model.

    Use the :meth:`tumor`, :meth:`fisher_kpp` and :meth:`custom`
    constructors; the raw constructor validates but does not fill defaults.
    """

    kind: ModelKind
    m: float
    p_m: float
    p_h: float
    custom_g_table: tuple[tuple[float, float], ...] | None = None
    rho_m: float = field(init=False)

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not self.m > 1:
            raise DomainError(f"m must exceed 1, got {self.m}")
        if not self.p_m > 0:
            raise DomainError(f"P_M must be positive, got {self.p_m}")
        if not self.p_h >= self.p_m:
            raise DomainError(f"P_H={self.p_h} must be at least P_M={self.p_m}")
        rho_m = density_from_pressure(self.p_m, self.m)
        object.__setattr__(self, "rho_m", rho_m)
        back = pressure_from_density(rho_m, self.m)
        if abs(back - self.p_m) > _REL_TOL * self.p_m:
            raise DomainError("P_M and rho_M are inconsistent")

        if kind is ModelKind.FISHER_KPP:
            expected = self.m / (self.m - 1.0)
            if abs(self.p_m - expected) > _REL_TOL * expected:
                raise DomainError(f"Fisher-KPP requires P_M = m/(m-1) = {expected!r}")
        if kind is ModelKind.CUSTOM:
            if not self.custom_g_table or len(self.custom_g_table) < 2:
                raise DomainError("custom model needs a table of at least two (P, G) points")
            table = tuple((float(p), float(g)) for p, g in self.custom_g_table)
            object.__setattr__(self, "custom_g_table", table)
            ps = np.array([p for p, _ in table])
            if np.any(np.diff(ps) <= 0):
                raise DomainError("custom G table pressures must be strictly increasing")
            if ps[0] > 0 or ps[-1] < self.p_h:
                raise DomainError("custom G table must cover [0, P_H]")
        elif self.custom_g_table is not None:
            raise DomainError("custom_g_table is only valid for kind=custom")

        if abs(eval_G(self, self.p_m)) > _REL_TOL * max(1.0, self.p_m):
            raise DomainError("G(P_M) must vanish")
        samples = eval_G(self, np.linspace(0.0, self.p_h, 1001))
        if np.any(np.diff(samples) > _REL_TOL * max(1.0, float(np.max(np.abs(samples))))):
            raise DomainError("G must be non-increasing on [0, P_H]")

    @classmethod
    def tumor(cls, m: float = 2.0, p_m: float = 1.0, p_h: float | None = None) -> "ModelSpec":
        return cls(ModelKind.TUMOR, float(m), float(p_m), float(p_m if p_h is None else p_h))

    @classmethod
    def fisher_kpp(cls, m: float = 2.0, p_h: float | None = None) -> "ModelSpec":
        p_m = m / (m - 1.0)
        return cls(ModelKind.FISHER_KPP, float(m), p_m, float(p_m if p_h is None else p_h))

    @classmethod
    def custom(cls, m: float, table, p_m: float | None = None, p_h: float | None = None) -> "ModelSpec":
        """Tabulated model; ``P_M`` defaults to the table's zero crossing."""
        table = tuple((float(p), float(g)) for p, g in table)
        if p_m is None:
            p_m = _table_root(table)
        if p_h is None:
            p_h = table[-1][0]
        return cls(ModelKind.CUSTOM, float(m), float(p_m), float(p_h), table)

    @property
    def table_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self.custom_g_table is None:
            raise DomainError("not a custom model")
        arr = np.array(self.custom_g_table, dtype=float)
        return arr[:, 0].copy(), arr[:, 1].copy()


def _table_root(table) -> float:
    for (p0, g0), (p1, g1) in zip(table, table[1:]):
        if g0 == 0.0:
            return p0
        if g0 > 0.0 >= g1:
            return p0 + (p1 - p0) * g0 / (g0 - g1)
    raise DomainError("custom G table has no zero crossing")


def _check_range(spec: ModelSpec, P: np.ndarray):
    slack = 1e-12 * max(1.0, spec.p_h)
    if np.any(P < -slack) or np.any(P > spec.p_h + slack) or np.any(np.isnan(P)):
        raise DomainError(f"pressure outside [0, P_H={spec.p_h}]")


def eval_G(spec: ModelSpec, P):
    """Reaction term in pressure form, ``G(P) = g(rho(P))``."""
    arr = np.asarray(P, dtype=float)
    _check_range(spec, arr)
    arr = np.clip(arr, 0.0, None)
    if spec.kind is ModelKind.TUMOR:
        out = spec.p_m - arr
    elif spec.kind is ModelKind.FISHER_KPP:
        out = 1.0 - ((spec.m - 1.0) * arr / spec.m) ** (1.0 / (spec.m - 1.0))
    else:
        ps, gs = spec.table_arrays
        out = np.interp(arr, ps, gs)
    return float(out) if np.ndim(out) == 0 else out


def eval_G_prime(spec: ModelSpec, P):
    """Derivative ``G'(P)``.

    Raises :class:`SingularityError` at ``P = 0`` for Fisher-KPP with ``m > 2``
    where the derivative is unbounded.  Custom tables use a central difference
    with step ``1e-6 * P_H`` (one-sided at the ends of ``[0, P_H]``), which
    recovers the segment slope away from breakpoints.
    """
    arr = np.asarray(P, dtype=float)
    _check_range(spec, arr)
    if spec.kind is ModelKind.TUMOR:
        out = np.full_like(arr, -1.0)
    elif spec.kind is ModelKind.FISHER_KPP:
        c, e = _fisher_coeffs(spec.m)
        if e < 0 and np.any(arr <= 0):
            raise SingularityError("Fisher-KPP G'(0) is unbounded for m > 2")
        with np.errstate(divide="ignore"):
            out = -c * np.where(arr > 0, arr, 0.0) ** e
        if e == 0:
            out = np.full_like(arr, -c)
    else:
        step = 1e-6 * spec.p_h
        lo = np.clip(arr - step, 0.0, spec.p_h)
        hi = np.clip(arr + step, 0.0, spec.p_h)
        out = (eval_G(spec, hi) - eval_G(spec, lo)) / (hi - lo)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class StructuralConstants:
    """Lower/upper slope constants of ``-G'`` on ``[0, P_M]`` and ``K_G``.

    Each field is a positive float or a :class:`Flag`.
    """

    d_g: float | Flag
    D_g: float | Flag
    K_g: float | Flag

    def require(self, name: str) -> float:
        value = getattr(self, name)
        if isinstance(value, Flag):
            raise DomainError(f"structural constant {name} is {value.value}")
        return value


def structural_constants(spec: ModelSpec, n: int = 2, samples: int = 20001) -> StructuralConstants:
    """Closed forms for the built-ins, dense sampling of ``-G'`` for tables.

    ``n`` is accepted for interface symmetry with the barrier constructions;
    none of the three constants depends on the dimension.
    """
    if n < 2:
        raise DomainError("spatial dimension must be at least 2")
    pm = spec.p_m
    if spec.kind is ModelKind.TUMOR:
        return StructuralConstants(1.0, 1.0, pm / 2.0)
    if spec.kind is ModelKind.FISHER_KPP:
        c, e = _fisher_coeffs(spec.m)
        k_g = c * (pm / 2.0) ** (1.0 / (spec.m - 1.0))
        if e == 0:
            return StructuralConstants(c, c, k_g)
        if e > 0:
            # -G' vanishes at P = 0
            return StructuralConstants(Flag.VIOLATED, c * pm**e, k_g)
        return StructuralConstants(c * pm**e, Flag.UNBOUNDED, k_g)

    ps, gs = spec.table_arrays
    slopes = -np.diff(gs) / np.diff(ps)
    grid = np.linspace(0.0, pm, max(samples, 10001))
    seg = np.clip(np.searchsorted(ps, grid, side="right") - 1, 0, len(slopes) - 1)
    neg_gp = slopes[seg]
    d_val = float(np.min(neg_gp))
    D_val = float(np.max(neg_gp))
    half = grid <= pm / 2.0
    tail_max = np.maximum.accumulate(neg_gp[half][::-1])[::-1]
    k_val = float(np.max(grid[half] * tail_max))
    return StructuralConstants(
        d_val if d_val > 0 else Flag.VIOLATED,
        D_val if D_val > 0 else Flag.VIOLATED,
        k_val if k_val > 0 else Flag.VIOLATED,
    )


def g_of_density(spec: ModelSpec, rho):
    """``g(rho)`` evaluated through the pressure form."""
    return eval_G(spec, pressure_from_density(rho, spec.m))


def is_lab_condition(spec: ModelSpec, samples: int = 2001) -> bool:
    """Whether ``G(P) - P G'(P) >= 0`` on sampled points of ``(0, P_H]``."""
    P = np.linspace(0.0, spec.p_h, samples)[1:]
    return bool(np.all(eval_G(spec, P) - P * eval_G_prime(spec, P) >= -1e-12))


def tumor_upper_envelope(t, p_m: float, p_h: float, m: float):
    """Spatially constant super-solution for tumor growth started at ``P_H``.

    Solves ``f' = (m-1) f (P_M - f)``, ``f(0) = P_H`` in closed form and
    returns ``f(t) - P_M``.
    """
    t = np.asarray(t, dtype=float)
    if p_h == p_m:
        out = np.zeros_like(t)
    else:
        decay = np.exp(-(m - 1.0) * p_m * t)
        out = p_m * decay / (p_h / (p_h - p_m) - decay)
    return float(out) if out.ndim == 0 else out


__all__ = [
    "Flag",
    "ModelKind",
    "ModelSpec",
    "StructuralConstants",
    "density_from_pressure",
    "eval_G",
    "eval_G_prime",
    "g_of_density",
    "is_lab_condition",
    "pressure_from_density",
    "structural_constants",
    "tumor_upper_envelope",
]
