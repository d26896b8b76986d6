"""Uniform 1D grids and the measures/functions that live on them.

Cells are centred on the nodes, so node ``i`` owns the interval
``[x_i - h/2, x_i + h/2]`` and carries mass ``weights[i] * h``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError

NORMALIZATION_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    m: int

    def __post_init__(self):
        if self.m < 3:
            raise GridError(f"grid needs at least 3 points, got m={self.m}")
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.hi <= self.lo:
            raise GridError(f"invalid grid bounds [{self.lo}, {self.hi}]")

    @classmethod
    def from_spacing(cls, lo, hi, h):
        m = int(round((hi - lo) / h)) + 1
        return cls(float(lo), float(hi), m)

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.m - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.m)

    @property
    def edges(self) -> np.ndarray:
        h = self.h
        return np.linspace(self.lo - h / 2, self.hi + h / 2, self.m + 1)

    def refine(self, factor=2):
        return Grid(self.lo, self.hi, (self.m - 1) * factor + 1)

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "m": self.m}


def check_same_grid(*grids):
    g0 = grids[0]
    for g in grids[1:]:
        if g != g0:
            raise GridError(f"grid mismatch: {g0} vs {g}")
    return g0


@dataclass(frozen=True)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.m,):
            raise GridError(f"expected {self.grid.m} values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    def __call__(self, x):
        return np.interp(x, self.grid.x, self.values)

    def to_csv_rows(self):
        return np.column_stack([self.grid.x, self.values])


class GridMeasure:
    """Probability density on a uniform grid (sum of weights times h is one)."""

    def __init__(self, grid: Grid, weights, *, check=True):
        w = np.asarray(weights, dtype=float)
        if w.shape != (grid.m,):
            raise GridError(f"expected {grid.m} weights, got shape {w.shape}")
        if check:
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise GridError("weights must be finite and nonnegative")
            total = w.sum() * grid.h
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise GridError(f"weights integrate to {total!r}, not 1")
        self.grid = grid
        self.weights = w

    @classmethod
    def from_density(cls, grid: Grid, density):
        f = np.asarray(density, dtype=float)
        if np.any(f < 0) or not np.all(np.isfinite(f)):
            raise GridError("density must be finite and nonnegative")
        z = f.sum() * grid.h
        if z <= 0:
            raise GridError("density has zero mass on the grid")
        return cls(grid, f / z)

    @classmethod
    def from_log_density(cls, grid: Grid, logf):
        logf = np.asarray(logf, dtype=float)
        return cls.from_density(grid, np.exp(logf - np.max(logf)))

    @classmethod
    def gaussian(cls, grid: Grid, mean=0.0, var=1.0):
        x = grid.x
        return cls.from_log_density(grid, -0.5 * (x - mean) ** 2 / var)

    @classmethod
    def point_mass(cls, grid: Grid, x0):
        i = int(np.argmin(np.abs(grid.x - x0)))
        w = np.zeros(grid.m)
        w[i] = 1.0 / grid.h
        return cls(grid, w)

    @property
    def x(self):
        return self.grid.x

    @property
    def masses(self) -> np.ndarray:
        return self.weights * self.grid.h

    def expect(self, f_values) -> float:
        return float(np.dot(self.masses, f_values))

    def mean(self) -> float:
        return self.expect(self.grid.x)

    def var(self) -> float:
        mu = self.mean()
        return self.expect((self.grid.x - mu) ** 2)

    def cdf_at_edges(self) -> np.ndarray:
        c = np.concatenate([[0.0], np.cumsum(self.masses)])
        return c / c[-1]

    def quantile(self, u) -> np.ndarray:
        """Inverse of the piecewise-linear CDF of the cell histogram."""
        u = np.asarray(u, dtype=float)
        c = self.cdf_at_edges()
        edges = self.grid.edges
        p = self.masses / self.masses.sum()
        idx = np.clip(np.searchsorted(c, u, side="right") - 1, 0, self.grid.m - 1)
        pi = p[idx]
        frac = np.where(pi > 0, (u - c[idx]) / np.where(pi > 0, pi, 1.0), 0.0)
        return edges[idx] + np.clip(frac, 0.0, 1.0) * self.grid.h

    def sample(self, size, rng) -> np.ndarray:
        """Exact draws from the piecewise-constant density."""
        return self.quantile(rng.random(size))

    def with_weights(self, w):
        return GridMeasure.from_density(self.grid, w)

    def to_csv_rows(self):
        return np.column_stack([self.grid.x, self.weights])

    def __repr__(self):
        return f"GridMeasure(grid={self.grid}, mean={self.mean():.6g}, var={self.var():.6g})"


class PhaseGridMeasure:
    """Density on a product grid; axis 0 is position, axis 1 is velocity."""

    def __init__(self, xgrid: Grid, vgrid: Grid, weights, *, check=True):
        w = np.asarray(weights, dtype=float)
        if w.shape != (xgrid.m, vgrid.m):
            raise GridError(f"expected shape {(xgrid.m, vgrid.m)}, got {w.shape}")
        if check:
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise GridError("weights must be finite and nonnegative")
            total = w.sum() * xgrid.h * vgrid.h
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise GridError(f"weights integrate to {total!r}, not 1")
        self.xgrid = xgrid
        self.vgrid = vgrid
        self.weights = w

    @classmethod
    def from_density(cls, xgrid, vgrid, density):
        f = np.asarray(density, dtype=float)
        z = f.sum() * xgrid.h * vgrid.h
        if z <= 0 or np.any(f < 0):
            raise GridError("density must be nonnegative with positive mass")
        return cls(xgrid, vgrid, f / z)

    @classmethod
    def product(cls, mu_x: GridMeasure, mu_v: GridMeasure):
        return cls.from_density(mu_x.grid, mu_v.grid, np.outer(mu_x.weights, mu_v.weights))

    @property
    def cell_area(self):
        return self.xgrid.h * self.vgrid.h

    @property
    def masses(self):
        return self.weights * self.cell_area

    def x_marginal(self) -> GridMeasure:
        return GridMeasure.from_density(self.xgrid, self.weights.sum(axis=1))

    def v_marginal(self) -> GridMeasure:
        return GridMeasure.from_density(self.vgrid, self.weights.sum(axis=0))

    def to_csv_rows(self):
        X, V = np.meshgrid(self.xgrid.x, self.vgrid.x, indexing="ij")
        return np.column_stack([X.ravel(), V.ravel(), self.weights.ravel()])
