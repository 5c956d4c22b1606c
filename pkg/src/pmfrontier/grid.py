"""Grid geometry and cell-centred density fields."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError


class GeomKind(str, enum.Enum):
    RADIAL = "radial"
    CARTESIAN2D = "cartesian2d"


@dataclass(frozen=True)
class GridGeom:
    """Uniform cell-centred grid.

    ``RADIAL`` covers ``r in [0, extent]`` with centres ``(i + 1/2) h`` in an
    ``n_dim``-dimensional radially symmetric setting.  ``CARTESIAN2D`` covers
    ``[-extent, extent]^2`` with ``2 * cells`` cells per axis.
    """

    kind: GeomKind
    h: float
    extent: float
    n_dim: int = 2
    cells: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", GeomKind(self.kind))
        if not self.h > 0 or not self.extent > 0:
            raise DomainError("h and extent must be positive")
        if self.n_dim < 2:
            raise DomainError("n_dim must be at least 2")
        if self.kind is GeomKind.CARTESIAN2D and self.n_dim != 2:
            raise DomainError("cartesian2d grids are two-dimensional")
        cells = int(round(self.extent / self.h))
        if cells < 1 or abs(cells * self.h - self.extent) > 1e-12 * self.extent:
            raise DomainError(f"extent={self.extent} is not a whole number of cells of size h={self.h}")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def radial(cls, h: float, extent: float, n_dim: int = 2) -> "GridGeom":
        return cls(GeomKind.RADIAL, float(h), float(extent), int(n_dim))

    @classmethod
    def cartesian(cls, h: float, extent: float) -> "GridGeom":
        return cls(GeomKind.CARTESIAN2D, float(h), float(extent), 2)

    @property
    def shape(self) -> tuple[int, ...]:
        if self.kind is GeomKind.RADIAL:
            return (self.cells,)
        return (2 * self.cells, 2 * self.cells)

    @property
    def dim_factor(self) -> int:
        return 2 if self.kind is GeomKind.CARTESIAN2D else self.n_dim

    def axis(self) -> np.ndarray:
        """Cell centres along one axis."""
        if self.kind is GeomKind.RADIAL:
            return (np.arange(self.cells) + 0.5) * self.h
        return -self.extent + (np.arange(2 * self.cells) + 0.5) * self.h

    def radii(self) -> np.ndarray:
        """Distance of every cell centre from the origin, shaped like the field."""
        x = self.axis()
        if self.kind is GeomKind.RADIAL:
            return x
        return np.hypot(x[:, None], x[None, :])

    def cell_volumes(self) -> np.ndarray:
        """Quadrature weights whose weighted sum the conservative scheme preserves.

        For radial grids this is ``|S^{n-1}| r_i^{n-1} h``, matching the flux
        form of the discrete Laplacian.
        """
        if self.kind is GeomKind.RADIAL:
            n = self.n_dim
            sphere = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
            return sphere * self.axis() ** (n - 1) * self.h
        return np.full(self.shape, self.h**2)

    def header(self) -> dict[str, object]:
        return {"kind": self.kind.value, "n_dim": self.n_dim, "h": self.h, "extent": self.extent, "cells": self.cells}


@dataclass(frozen=True, eq=False)
class Field:
    """Density values on a grid at time ``t``; pressure is derived on demand."""

    geom: GridGeom
    rho: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != self.geom.shape:
            raise DomainError(f"field shape {rho.shape} does not match grid {self.geom.shape}")
        if np.any(np.isnan(rho)) or np.any(rho < 0):
            raise DomainError("density must be finite and non-negative")
        object.__setattr__(self, "rho", rho)

    def with_rho(self, rho: np.ndarray, t: float | None = None) -> "Field":
        return replace(self, rho=rho, t=self.t if t is None else t)

    def mass(self) -> float:
        return float(np.sum(self.rho * self.geom.cell_volumes()))
