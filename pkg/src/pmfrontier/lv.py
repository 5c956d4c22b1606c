"""Lotka-Volterra barrier systems and the quadratic barriers they parametrize.

Two competition systems are integrated with fixed-step RK4:

* the *sub* system for ``(alpha, beta)``, whose barrier
  ``(alpha - beta |x|^2)_+`` lies below every solution started above it;
* the *sup* system for ``(lambda, kappa)``, whose barrier lies above every
  solution started below it.

Both are written as

    a' = k a (P_M - a - c_lo b)
    b' = k b (P_M - s a - c_hi b)

with ``k = (m-1) d``, ``c_lo = 2n/d``, ``c_hi = (2n(m-1)+4)/(d(m-1))`` and
``s = 1`` (sub) or ``s = 2`` (sup); ``d`` is ``d_G`` or ``D_G``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DomainError, ExtrapolationError, GateViolation, InvariantBreach
from .model import ModelSpec, eval_G, structural_constants

T_END_MAX = 1e4
DEFAULT_DT = 1e-3


class BarrierKind(str, enum.Enum):
    SUB = "sub"
    SUP = "sup"


@dataclass(frozen=True)
class LVSubParams:
    p_m: float
    m: float
    n: int
    d_g: float
    alpha0: float
    beta0: float

    kind = BarrierKind.SUB

    def __post_init__(self):
        for name in ("p_m", "d_g", "alpha0", "beta0"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not self.m > 1:
            raise DomainError("m must exceed 1")
        if self.n < 2:
            raise DomainError("n must be at least 2")

    @classmethod
    def from_model(cls, spec: ModelSpec, n: int, alpha0: float, beta0: float) -> "LVSubParams":
        d_g = structural_constants(spec, n).require("d_g")
        return cls(spec.p_m, spec.m, n, d_g, alpha0, beta0)

    @property
    def slope(self) -> float:
        return self.d_g

    @property
    def initial(self) -> tuple[float, float]:
        return self.alpha0, self.beta0


@dataclass(frozen=True)
class LVSupParams:
    p_m: float
    m: float
    n: int
    D_g: float
    lambda0: float
    kappa0: float

    kind = BarrierKind.SUP

    def __post_init__(self):
        for name in ("p_m", "D_g", "lambda0", "kappa0"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not self.m > 1:
            raise DomainError("m must exceed 1")
        if self.n < 2:
            raise DomainError("n must be at least 2")

    @classmethod
    def from_model(cls, spec: ModelSpec, n: int, lambda0: float, kappa0: float) -> "LVSupParams":
        D_g = structural_constants(spec, n).require("D_g")
        return cls(spec.p_m, spec.m, n, D_g, lambda0, kappa0)

    @property
    def slope(self) -> float:
        return self.D_g

    @property
    def initial(self) -> tuple[float, float]:
        return self.lambda0, self.kappa0


LVParams = LVSubParams | LVSupParams


def _coefficients(p: LVParams) -> tuple[float, float, float, float]:
    d = p.slope
    k = (p.m - 1.0) * d
    c_lo = 2.0 * p.n / d
    c_hi = (2.0 * p.n * (p.m - 1.0) + 4.0) / (d * (p.m - 1.0))
    s = 1.0 if p.kind is BarrierKind.SUB else 2.0
    return k, c_lo, c_hi, s


@dataclass(frozen=True)
class GateResult:
    ok: bool
    upper_margin: float
    lower_margin: float
    gate: str

    def __bool__(self):
        return self.ok

    def failed_gate(self) -> str | None:
        if self.upper_margin <= 0:
            return f"{self.gate} upper gate"
        if self.lower_margin <= 0:
            return f"{self.gate} lower gate"
        return None


def check_gate_sub(p: LVSubParams) -> GateResult:
    """``P_M - c_lo beta0 > alpha0 > P_M - c_hi beta0`` with both slacks."""
    _, c_lo, c_hi, _ = _coefficients(p)
    upper = (p.p_m - c_lo * p.beta0) - p.alpha0
    lower = p.alpha0 - (p.p_m - c_hi * p.beta0)
    return GateResult(upper > 0 and lower > 0, upper, lower, "ini1")


def check_gate_sup(p: LVSupParams) -> GateResult:
    """``P_M - lambda0 - c_lo kappa0 > 0 > P_M - 2 lambda0 - c_hi kappa0``."""
    _, c_lo, c_hi, _ = _coefficients(p)
    upper = p.p_m - p.lambda0 - c_lo * p.kappa0
    lower = -(p.p_m - 2.0 * p.lambda0 - c_hi * p.kappa0)
    return GateResult(upper > 0 and lower > 0, upper, lower, "lowini")


def check_gate(p: LVParams) -> GateResult:
    return check_gate_sub(p) if p.kind is BarrierKind.SUB else check_gate_sup(p)


def _rhs(p: LVParams, a, b):
    k, c_lo, c_hi, s = _coefficients(p)
    return k * a * (p.p_m - a - c_lo * b), k * b * (p.p_m - s * a - c_hi * b)


def rhs_sub(p: LVSubParams, state):
    a, b = state
    return _rhs(p, a, b)


def rhs_sup(p: LVSupParams, state):
    a, b = state
    return _rhs(p, a, b)


@numba.njit(cache=True)
def _rk4(a0, b0, k, pm, c_lo, c_hi, s, dt, steps):
    out = np.empty((steps + 1, 2))
    a = a0
    b = b0
    out[0, 0] = a
    out[0, 1] = b
    for i in range(steps):
        k1a = k * a * (pm - a - c_lo * b)
        k1b = k * b * (pm - s * a - c_hi * b)
        a2 = a + 0.5 * dt * k1a
        b2 = b + 0.5 * dt * k1b
        k2a = k * a2 * (pm - a2 - c_lo * b2)
        k2b = k * b2 * (pm - s * a2 - c_hi * b2)
        a3 = a + 0.5 * dt * k2a
        b3 = b + 0.5 * dt * k2b
        k3a = k * a3 * (pm - a3 - c_lo * b3)
        k3b = k * b3 * (pm - s * a3 - c_hi * b3)
        a4 = a + dt * k3a
        b4 = b + dt * k3b
        k4a = k * a4 * (pm - a4 - c_lo * b4)
        k4b = k * b4 * (pm - s * a4 - c_hi * b4)
        a = a + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        b = b + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        out[i + 1, 0] = a
        out[i + 1, 1] = b
    return out


@dataclass(frozen=True, eq=False)
class LVTrajectory:
    """Sampled solution of one barrier system.

    ``states[:, 0]`` is alpha (or lambda), ``states[:, 1]`` beta (or kappa).
    """

    times: np.ndarray
    states: np.ndarray
    kind: BarrierKind
    dt: float
    params: LVParams

    @property
    def first(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def second(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def at(self, t):
        """Linearly interpolated ``(first, second)`` at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_end * (1 + 1e-12) + 1e-15):
            raise ExtrapolationError(f"t outside integrated range [0, {self.t_end}]")
        if len(self.times) == 1:
            a = np.full_like(t, self.first[0])
            b = np.full_like(t, self.second[0])
        else:
            a = np.interp(t, self.times, self.first)
            b = np.interp(t, self.times, self.second)
        if t.ndim == 0:
            return float(a), float(b)
        return a, b

    def thin(self, every: int) -> "LVTrajectory":
        """Every ``every``-th sample, always keeping the last one."""
        idx = np.arange(0, len(self.times), max(1, int(every)))
        if idx[-1] != len(self.times) - 1:
            idx = np.append(idx, len(self.times) - 1)
        return LVTrajectory(self.times[idx], self.states[idx], self.kind, self.dt, self.params)


def integrate(p: LVParams, t_end: float, dt: float = DEFAULT_DT, check: bool = True) -> LVTrajectory:
    """Fixed-step RK4 trajectory from the gated initial state.

    The step is shrunk to ``t_end / ceil(t_end / dt)`` so the grid ends
    exactly at ``t_end``.  With ``check`` the invariants of the sampled
    trajectory are verified and :class:`InvariantBreach` names the first
    failing sample.
    """
    gate = check_gate(p)
    if not gate.ok:
        raise GateViolation(gate.failed_gate(), f"initial data {p.initial} not admissible")
    if t_end < 0 or t_end > T_END_MAX:
        raise DomainError(f"t_end must lie in [0, {T_END_MAX:g}]")
    a0, b0 = p.initial
    if t_end == 0:
        return LVTrajectory(np.zeros(1), np.array([[a0, b0]]), p.kind, dt, p)
    if not (0 < dt <= min(1e-2, t_end / 100.0)):
        raise DomainError(f"dt={dt} must lie in (0, min(1e-2, t_end/100)]")
    steps = int(math.ceil(t_end / dt - 1e-9))
    h = t_end / steps
    k, c_lo, c_hi, s = _coefficients(p)
    states = _rk4(a0, b0, k, p.p_m, c_lo, c_hi, s, h, steps)
    times = np.arange(steps + 1) * h
    times[-1] = t_end
    traj = LVTrajectory(times, states, p.kind, h, p)
    if check:
        check_invariants(traj)
    return traj


def _first_false(mask: np.ndarray) -> int | None:
    bad = np.flatnonzero(~mask)
    return int(bad[0]) if bad.size else None


def check_invariants(traj: LVTrajectory) -> None:
    """Raise :class:`InvariantBreach` at the first sample violating the
    monotonicity, range and (for the sub system) sandwich invariants."""
    p = traj.params
    a, b = traj.first, traj.second
    if len(a) < 2:
        return
    _, c_lo, c_hi, _ = _coefficients(p)
    a0, b0 = p.initial
    checks = [
        ("first component not strictly increasing", np.diff(a) > 0, 1),
        ("second component not strictly decreasing", np.diff(b) < 0, 1),
        ("first component left (a0, P_M)", (a[1:] > a0) & (a[1:] < p.p_m), 1),
        ("second component left (0, b0)", (b[1:] > 0) & (b[1:] < b0), 1),
    ]
    if traj.kind is BarrierKind.SUB:
        checks.append(("sandwich violated", (p.p_m - c_lo * b > a) & (a > p.p_m - c_hi * b), 0))
        checks.append(("alpha/beta not increasing", np.diff(a / b) > 0, 1))
    for msg, mask, offset in checks:
        i = _first_false(mask)
        if i is not None:
            j = i + offset
            raise InvariantBreach(f"{msg} at sample {j} (t={traj.times[j]:.6g}); dt too large?", j)


@dataclass(frozen=True)
class SubBounds:
    f1_upper: np.ndarray | float
    f2_lower: np.ndarray | float
    beta_low: np.ndarray | float
    beta_high: np.ndarray | float
    gap_low: np.ndarray | float
    gap_high: np.ndarray | float


@dataclass(frozen=True)
class SupBounds:
    ratio_low: np.ndarray | float
    ratio_high: np.ndarray | float
    kappa_low: np.ndarray | float
    kappa_high: np.ndarray | float
    gap_low: np.ndarray | float
    gap_high: np.ndarray | float
    slow_rate: float
    fast_rate: float


def _logistic_gap(pm, f0, decay):
    # distance to P_M of the logistic comparison function started at f0
    return pm * abs(pm - f0) * decay / (abs(pm - f0) * decay + f0)


def _maybe_float(x):
    return float(x) if np.ndim(x) == 0 else x


def closed_form_bounds_sub(p: LVSubParams, t) -> SubBounds:
    """Closed-form bands on ``alpha + c_lo beta``, ``alpha + c_hi beta``,
    ``beta`` and ``P_M - alpha`` for the sub system."""
    gate = check_gate_sub(p)
    if not gate.ok:
        raise GateViolation(gate.failed_gate(), "bounds need admissible initial data")
    t = np.asarray(t, dtype=float)
    k, c_lo, c_hi, _ = _coefficients(p)
    pm, a0, b0 = p.p_m, p.alpha0, p.beta0
    decay = np.exp(-pm * k * t)
    f10 = a0 + c_lo * b0
    f20 = a0 + c_hi * b0
    f1_upper = pm * f10 / ((pm - f10) * decay + f10)
    f2_lower = pm * f20 / ((f20 - pm) * decay + f20)
    # alpha/beta grows at rate 4*alpha with alpha in (alpha0, P_M)
    beta_low = a0 / (4.0 * pm * t + a0 / b0)
    beta_high = pm / (4.0 * a0 * t + a0 / b0)
    gap_low = _logistic_gap(pm, f10, decay) + c_lo * beta_low
    gap_high = _logistic_gap(pm, f20, decay) + c_hi * beta_high
    return SubBounds(*(_maybe_float(v) for v in (f1_upper, f2_lower, beta_low, beta_high, gap_low, gap_high)))


def closed_form_bounds_sup(p: LVSupParams, t) -> SupBounds:
    """Exponential bands on ``lambda/kappa``, ``kappa`` and ``P_M - lambda``.

    The slow rate is ``D_G (m-1) lambda0``; the fast rate
    ``D_G (m-1) P_M + 4 kappa0``.
    """
    gate = check_gate_sup(p)
    if not gate.ok:
        raise GateViolation(gate.failed_gate(), "bounds need admissible initial data")
    t = np.asarray(t, dtype=float)
    k, c_lo, c_hi, _ = _coefficients(p)
    pm, l0, k0 = p.p_m, p.lambda0, p.kappa0
    slow = k * l0
    fast = k * pm + 4.0 * k0
    ratio_low = l0 / k0 * np.exp(slow * t)
    ratio_high = l0 / k0 * np.exp(fast * t)
    kappa_low = k0 * np.exp(-fast * t)
    kappa_high = k0 * pm / l0 * np.exp(-slow * t)
    decay = np.exp(-pm * k * t)
    g10 = l0 + c_lo * k0
    g20 = l0 + c_hi * k0
    gap_low = _logistic_gap(pm, g10, decay) + c_lo * kappa_low
    gap_high = _logistic_gap(pm, g20, decay) + c_hi * kappa_high
    vals = (ratio_low, ratio_high, kappa_low, kappa_high, gap_low, gap_high)
    return SupBounds(*(_maybe_float(v) for v in vals), slow_rate=slow, fast_rate=fast)


def support_bound(p: LVSupParams, t):
    """Outer radius ``sqrt(lambda0/kappa0) exp(fast t / 2)`` bounding every
    solution started below the sup barrier."""
    fast = closed_form_bounds_sup(p, 0.0).fast_rate
    out = math.sqrt(p.lambda0 / p.kappa0) * np.exp(0.5 * fast * np.asarray(t, dtype=float))
    return _maybe_float(out)


def band_table(traj: LVTrajectory) -> dict[str, np.ndarray]:
    """Columns ``t, first, second`` plus every closed-form bound column."""
    cols = {"t": traj.times, "first": traj.first, "second": traj.second}
    if traj.kind is BarrierKind.SUB:
        b = closed_form_bounds_sub(traj.params, traj.times)
    else:
        b = closed_form_bounds_sup(traj.params, traj.times)
    for name in ("f1_upper", "f2_lower", "beta_low", "beta_high", "ratio_low", "ratio_high",
                 "kappa_low", "kappa_high", "gap_low", "gap_high"):
        if hasattr(b, name):
            cols[name] = np.broadcast_to(getattr(b, name), traj.times.shape)
    return cols


@dataclass(frozen=True, eq=False)
class Barrier:
    """Quadratic barrier ``(first(t) - second(t) r^2)_+`` in pressure units."""

    trajectory: LVTrajectory

    @property
    def kind(self) -> BarrierKind:
        return self.trajectory.kind

    @property
    def params(self) -> LVParams:
        return self.trajectory.params

    def __call__(self, t, r):
        return eval_barrier(self, t, r)

    def support_radius(self, t):
        a, b = self.trajectory.at(t)
        return _maybe_float(np.sqrt(np.asarray(a) / np.asarray(b)))


def eval_barrier(b: Barrier, t, r):
    """``max(first(t) - second(t) r^2, 0)``, broadcasting ``t`` and ``r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("radius must be non-negative")
    a, c = b.trajectory.at(t)
    out = np.maximum(np.asarray(a) - np.asarray(c) * r**2, 0.0)
    return _maybe_float(out)


def barrier_residual(b: Barrier, spec: ModelSpec, t, r):
    """Pressure-equation residual of the barrier at interior points.

    Returns ``Q_t - (m-1) Q dQ - |grad Q|^2 - (m-1) Q G(Q)`` using the exact
    derivatives of the quadratic and the system right-hand side for ``Q_t``.
    The sub barrier gives values ``<= 0``, the sup barrier ``>= 0``.
    """
    p = b.params
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    a, c = b.trajectory.at(t)
    a = np.asarray(a)
    c = np.asarray(c)
    q = a - c * r**2
    if np.any(q <= 1e-9):
        raise DomainError("residual requested outside the positivity set of the barrier")
    da, dc = _rhs(p, a, c)
    m, n = spec.m, p.n
    q_t = da - dc * r**2
    lap_q = -2.0 * n * c
    grad_sq = 4.0 * c**2 * r**2
    res = q_t - (m - 1.0) * q * lap_q - grad_sq - (m - 1.0) * q * eval_G(spec, q)
    return _maybe_float(res)


def support_radius_series(b: Barrier) -> tuple[np.ndarray, np.ndarray]:
    """``(t, sqrt(first/second))`` at every sample."""
    traj = b.trajectory
    return traj.times, np.sqrt(traj.first / traj.second)
