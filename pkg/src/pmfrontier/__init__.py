"""Barrier systems, an explicit porous-medium solver and free-boundary
diagnostics for pressure-dependent growth models."""

from .errors import (ConfigError, DomainError, DomainTooSmall, ExtrapolationError, FitError, FrontError,
                     GateViolation, InstabilityError, InvariantBreach, PMFrontierError, SingularityError)
from .grid import Field, GeomKind, GridGeom
from .lv import (Barrier, BarrierKind, LVSubParams, LVSupParams, LVTrajectory, barrier_residual, check_gate,
                 closed_form_bounds_sub, closed_form_bounds_sup, eval_barrier, integrate)
from .model import ModelKind, ModelSpec, StructuralConstants, eval_G, eval_G_prime, structural_constants
from .solver import RunResult, SolveConfig, run, stable_dt, step

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "DomainTooSmall", "ExtrapolationError", "FitError", "FrontError",
    "GateViolation", "InstabilityError", "InvariantBreach", "PMFrontierError", "SingularityError",
    "Field", "GeomKind", "GridGeom",
    "Barrier", "BarrierKind", "LVSubParams", "LVSupParams", "LVTrajectory", "barrier_residual", "check_gate",
    "closed_form_bounds_sub", "closed_form_bounds_sup", "eval_barrier", "integrate",
    "ModelKind", "ModelSpec", "StructuralConstants", "eval_G", "eval_G_prime", "structural_constants",
    "RunResult", "SolveConfig", "run", "stable_dt", "step",
]
