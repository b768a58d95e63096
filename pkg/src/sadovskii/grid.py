"""Uniform cell-centred discretisation of a window of the upper half-plane.

Arrays of cell values are stored with shape ``(n2, n1)``: row ``j`` holds the
cells at height ``(j + 1/2) h2``, column ``i`` the cells at
``(i + 1/2) h1 - l1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class HalfPlaneGrid:
    """Window ``[-l1, l1] x (0, l2]`` split into ``n1 x n2`` equal cells."""

    n1: int
    n2: int
    h1: float
    h2: float
    l1: float

    def __post_init__(self):
        if self.n1 < 2 or self.n1 % 2:
            raise GridError(f"n1 must be even and positive, got {self.n1}")
        if self.n2 < 1:
            raise GridError(f"n2 must be positive, got {self.n2}")
        if not (self.h1 > 0 and self.h2 > 0 and self.l1 > 0):
            raise GridError("cell widths and window half-width must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n2, self.n1)

    @property
    def l2(self) -> float:
        return self.n2 * self.h2

    @property
    def cell_area(self) -> float:
        return self.h1 * self.h2

    @property
    def x1(self) -> np.ndarray:
        """Cell-centre abscissae, length n1; exactly antisymmetric."""
        return (np.arange(self.n1) - (self.n1 // 2 - 0.5)) * self.h1

    @property
    def x2(self) -> np.ndarray:
        """Cell-centre heights, length n2."""
        return (np.arange(self.n2) + 0.5) * self.h2

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2)

    def mirror_index(self, i: int) -> int:
        return self.n1 - 1 - i

    def scaled(self, s: float) -> "HalfPlaneGrid":
        """Same cell counts, every length multiplied by ``s``."""
        return HalfPlaneGrid(self.n1, self.n2, self.h1 * s, self.h2 * s, self.l1 * s)


def build_grid(n1: int, n2: int, l1: float, l2: float) -> HalfPlaneGrid:
    if n1 < 4 or n2 < 4:
        raise GridError(f"need n1, n2 >= 4, got ({n1}, {n2})")
    if n1 % 2:
        raise GridError(f"n1 must be even for mirror symmetry about x1 = 0, got {n1}")
    if not (l1 > 0 and l2 > 0):
        raise GridError(f"window dimensions must be positive, got l1={l1}, l2={l2}")
    return HalfPlaneGrid(int(n1), int(n2), 2.0 * l1 / n1, l2 / n2, float(l1))


@dataclass(frozen=True, eq=False)
class PatchDensity:
    """Relaxed vortex patch: one value in [0, 1] per cell."""

    grid: HalfPlaneGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != self.grid.shape:
            raise GridError(f"values have shape {v.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("patch values must be finite")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise GridError("patch values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: HalfPlaneGrid) -> "PatchDensity":
        return cls(grid, np.zeros(grid.shape))

    def with_values(self, values: np.ndarray) -> "PatchDensity":
        return PatchDensity(self.grid, values)

    def is_zero(self) -> bool:
        return not np.any(self.values)


def _fsum(a: np.ndarray) -> float:
    return math.fsum(np.ravel(a).tolist())


def mass(omega: PatchDensity) -> float:
    return omega.grid.cell_area * _fsum(omega.values)


def impulse(omega: PatchDensity) -> float:
    g = omega.grid
    return g.cell_area * _fsum(omega.values * g.x2[:, None])


def centroid(omega: PatchDensity) -> tuple[float, float]:
    """Centre of vorticity ``(x1c, x2c)``; undefined for the zero patch."""
    m = _fsum(omega.values)
    if m == 0.0:
        raise GridError("centroid of a zero patch is undefined")
    g = omega.grid
    return (_fsum(omega.values * g.x1[None, :]) / m, _fsum(omega.values * g.x2[:, None]) / m)


def row_mass(omega: PatchDensity) -> np.ndarray:
    """Mass carried by each row, length n2."""
    return omega.values.sum(axis=1) * omega.grid.cell_area


def patch_from_predicate(grid: HalfPlaneGrid,
                         region: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> PatchDensity:
    """Indicator of the cells whose centre satisfies ``region(x1, x2)``.

    ``region`` receives broadcast coordinate arrays and must return a
    boolean array (or a scalar bool).
    """
    X1, X2 = grid.mesh()
    inside = np.broadcast_to(np.asarray(region(X1, X2), dtype=bool), grid.shape)
    return PatchDensity(grid, inside.astype(np.float64))


def mirror(omega: PatchDensity) -> PatchDensity:
    """Reflection ``x1 -> -x1``."""
    return omega.with_values(omega.values[:, ::-1])


def shift_cells(omega: PatchDensity, k: int) -> PatchDensity:
    """Translate by ``k`` whole cells in x1; refuses to drop support."""
    v = omega.values
    if k == 0:
        return omega.with_values(v)
    cols = np.flatnonzero(v.any(axis=0))
    if cols.size and (cols[0] + k < 0 or cols[-1] + k >= omega.grid.n1):
        raise GridError(f"shift by {k} cells pushes the support outside the window")
    return omega.with_values(np.roll(v, k, axis=1))


def touches_window_edge(omega: PatchDensity) -> bool:
    """True when any cell on the left, right or top edge is occupied."""
    v = omega.values
    return bool(v[:, 0].any() or v[:, -1].any() or v[-1, :].any())
