"""Least-squares rate fits on log-transformed series."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import FitError

MIN_POINTS = 10
MISFIT_RMS = 0.05


class FitKind(str, enum.Enum):
    POWER_LAW = "power-law"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class RateFit:
    """``log y = intercept + exponent_or_rate * x`` with ``x = log(1+t)`` or ``x = t``."""

    exponent_or_rate: float
    intercept: float
    residual_rms: float
    window: tuple[float, float]
    kind: FitKind
    n_points: int

    @property
    def good_fit(self) -> bool:
        return self.residual_rms <= MISFIT_RMS

    @property
    def flag(self) -> str:
        if self.good_fit:
            return "ok"
        return "not power law" if self.kind is FitKind.POWER_LAW else "not exponential"

    def as_dict(self) -> dict[str, object]:
        return {
            "kind": self.kind.value,
            "exponent_or_rate": self.exponent_or_rate,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
            "window_lo": self.window[0],
            "window_hi": self.window[1],
            "n_points": self.n_points,
            "flag": self.flag,
        }


def _select(t, y, window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape:
        raise FitError("t and y must have the same shape")
    lo, hi = (float(t.min()), float(t.max())) if window is None else map(float, window)
    if not hi > lo:
        raise FitError(f"empty fit window [{lo}, {hi}]")
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < MIN_POINTS:
        raise FitError(f"only {int(sel.sum())} points in window [{lo:g}, {hi:g}]; need {MIN_POINTS}")
    if np.any(~(y[sel] > 0)):
        raise FitError("series must be strictly positive inside the fit window")
    return t[sel], y[sel], (lo, hi)


def _ols(x, logy):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, logy, rcond=None)
    resid = logy - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def fit_power_law(t, y, window=None) -> RateFit:
    """Fit ``y ~ C (1+t)^p``; returns ``p`` as ``exponent_or_rate``."""
    ts, ys, win = _select(t, y, window)
    p, c, rms = _ols(np.log1p(ts), np.log(ys))
    return RateFit(p, c, rms, win, FitKind.POWER_LAW, len(ts))


def fit_exponential(t, y, window=None) -> RateFit:
    """Fit ``y ~ C e^{k t}``; returns ``k`` as ``exponent_or_rate``."""
    ts, ys, win = _select(t, y, window)
    k, c, rms = _ols(ts, np.log(ys))
    return RateFit(k, c, rms, win, FitKind.EXPONENTIAL, len(ts))
