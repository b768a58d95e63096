"""Steiner symmetrisation about the x2-axis and x1 re-centring."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .grid import GridError, HalfPlaneGrid, PatchDensity, centroid, shift_cells


class SymmetrizedPatch(PatchDensity):
    """A patch whose rows are even in x1 and non-increasing away from the axis."""

    @property
    def is_steiner_symmetric(self) -> bool:
        return is_steiner_symmetric(self)


@lru_cache(maxsize=32)
def _deal_order(n1: int) -> np.ndarray:
    # centre-left, centre-right, next-left, next-right, ...
    half = n1 // 2
    order = np.empty(n1, dtype=np.intp)
    order[0::2] = np.arange(half - 1, -1, -1)
    order[1::2] = np.arange(half, n1)
    return order


def steiner_symmetrize(omega: PatchDensity) -> SymmetrizedPatch:
    """Rearrange each row into an even profile decreasing away from x1 = 0.

    Each row keeps exactly its multiset of values, so row sums, mass,
    impulse and every discrete L^q norm are unchanged.
    """
    v = omega.values
    out = np.empty_like(v)
    out[:, _deal_order(omega.grid.n1)] = -np.sort(-v, axis=1, kind="stable")
    return SymmetrizedPatch(omega.grid, out)


def is_steiner_symmetric(omega: PatchDensity) -> bool:
    v = omega.values
    half = v[:, omega.grid.n1 // 2:]
    return bool(np.array_equal(v, v[:, ::-1]) and np.all(np.diff(half, axis=1) <= 0))


def recenter(omega: PatchDensity) -> tuple[PatchDensity, int]:
    """Whole-cell x1 shift putting the centroid within one cell of 0.

    Returns the shifted patch and the shift in cells.
    """
    if omega.is_zero():
        raise GridError("cannot recenter a zero patch")
    g: HalfPlaneGrid = omega.grid
    c1, _ = centroid(omega)
    k = -int(np.rint(c1 / g.h1))
    return shift_cells(omega, k), k
