"""Half-plane Green's function, stream function and kinetic energy.

The stream function of a piecewise-constant patch is evaluated exactly: each
cell contributes the integral of ``G(x, .)`` over its rectangle, split into
the free-space part ``-(1/2pi) log|x - y|`` and the image part
``(1/2pi) log|x - y*|`` with ``y* = (y1, -y2)``.  Both are rectangle
integrals of ``log|r|`` and have a closed form, so the singular self-cell
needs no special quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import HalfPlaneGrid, PatchDensity, _fsum

INV_2PI = 1.0 / (2.0 * math.pi)
INV_4PI = 1.0 / (4.0 * math.pi)


def _check_point(p, name):
    p = np.asarray(p, dtype=float)
    if p.shape != (2,):
        raise ValueError(f"{name} must be a point (x1, x2)")
    if not p[1] > 0:
        raise ValueError(f"{name} must lie in the open upper half-plane, got x2={p[1]}")
    return p


def green_kernel(x, y) -> float:
    """``G(x, y) = (1/4pi) log(1 + 4 x2 y2 / |x - y|^2)``."""
    x = _check_point(x, "x")
    y = _check_point(y, "y")
    d2 = (x[0] - y[0]) ** 2 + (x[1] - y[1]) ** 2
    if d2 == 0.0:
        raise ValueError("green_kernel is singular at x == y")
    return INV_4PI * math.log1p(4.0 * x[1] * y[1] / d2)


def kernel_split(x, y) -> tuple[float, float]:
    """Free-space and image contributions; their sum is ``green_kernel(x, y)``."""
    x = _check_point(x, "x")
    y = _check_point(y, "y")
    d2 = (x[0] - y[0]) ** 2 + (x[1] - y[1]) ** 2
    if d2 == 0.0:
        raise ValueError("kernel_split is singular at x == y")
    d2_img = (x[0] - y[0]) ** 2 + (x[1] + y[1]) ** 2
    return -INV_4PI * math.log(d2), INV_4PI * math.log(d2_img)


def _log_antiderivative(x, y):
    # d^2/dxdy of this is log(sqrt(x^2 + y^2)); every term vanishes at 0
    r2 = x * x + y * y
    safe_r2 = np.where(r2 > 0, r2, 1.0)
    safe_x = np.where(x != 0, x, 1.0)
    safe_y = np.where(y != 0, y, 1.0)
    out = x * y * (np.log(safe_r2) - 3.0)
    out = out + np.where(x != 0, x * x * np.arctan(y / safe_x), 0.0)
    out = out + np.where(y != 0, y * y * np.arctan(x / safe_y), 0.0)
    return 0.5 * out


def log_rect_integral(c1, c2, h1, h2):
    """Integral of ``log|r|`` over the ``h1 x h2`` rectangle centred at ``(c1, c2)``."""
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    a1, b1 = c1 - 0.5 * h1, c1 + 0.5 * h1
    a2, b2 = c2 - 0.5 * h2, c2 + 0.5 * h2
    F = _log_antiderivative
    return F(b1, b2) - F(a1, b2) - F(b1, a2) + F(a1, a2)


def cell_green_integral(x1, x2, y1, y2, h1, h2):
    """Integral of ``G(x, .)`` over the cell centred at ``(y1, y2)``."""
    free = -INV_2PI * log_rect_integral(x1 - y1, x2 - y2, h1, h2)
    image = INV_2PI * log_rect_integral(x1 - y1, x2 + y2, h1, h2)
    return free + image


@dataclass(frozen=True, eq=False)
class StreamField:
    grid: HalfPlaneGrid
    psi: np.ndarray = field(repr=False)
    provenance: str = "fast"

    def symmetrized(self) -> "StreamField":
        """Average with the mirror image; exact evenness for even patches."""
        return StreamField(self.grid, 0.5 * (self.psi + self.psi[:, ::-1]), self.provenance)


def _points_stream(omega: PatchDensity, p1: np.ndarray, p2: np.ndarray,
                   chunk: int = 1 << 22) -> np.ndarray:
    g = omega.grid
    X1, X2 = g.mesh()
    nz = omega.values != 0
    w, y1, y2 = omega.values[nz], X1[nz], X2[nz]
    p1 = np.ravel(p1)
    p2 = np.ravel(p2)
    out = np.zeros(p1.size)
    if w.size == 0:
        return out
    step = max(1, chunk // w.size)
    for s in range(0, p1.size, step):
        q1 = p1[s:s + step, None]
        q2 = p2[s:s + step, None]
        k = cell_green_integral(q1, q2, y1[None, :], y2[None, :], g.h1, g.h2)
        out[s:s + step] = k @ w
    return out


def stream_field_direct(omega: PatchDensity) -> StreamField:
    """O(N^2) summation over occupied cells; the reference for the fast path."""
    g = omega.grid
    X1, X2 = g.mesh()
    psi = _points_stream(omega, X1, X2).reshape(g.shape)
    return StreamField(g, psi, "direct")


def stream_at(omega: PatchDensity, points) -> np.ndarray:
    """Stream function of the patch at arbitrary points of the half-plane."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts[:, 1] < 0):
        raise ValueError("points must satisfy x2 >= 0")
    return _points_stream(omega, pts[:, 0], pts[:, 1])


@lru_cache(maxsize=16)
def _kernel_transforms(grid: HalfPlaneGrid):
    n1, n2, h1, h2 = grid.n1, grid.n2, grid.h1, grid.h2
    P1, P2 = 2 * n1, 2 * n2
    d1 = np.arange(-(n1 - 1), n1) * h1
    d2 = np.arange(-(n2 - 1), n2) * h2
    D1, D2 = np.meshgrid(d1, d2)
    free = -INV_2PI * log_rect_integral(D1, D2, h1, h2)
    # image term depends on j + k; index d = j + k - (n2 - 1) after flipping rows
    s2 = (np.arange(-(n2 - 1), n2) + n2) * h2
    D1, S2 = np.meshgrid(d1, s2)
    image = INV_2PI * log_rect_integral(D1, S2, h1, h2)

    def wrap(table):
        out = np.zeros((P2, P1))
        r = np.arange(-(n2 - 1), n2) % P2
        c = np.arange(-(n1 - 1), n1) % P1
        out[np.ix_(r, c)] = table
        return np.fft.rfft2(out)

    return wrap(free), wrap(image)


def stream_field_fast(omega: PatchDensity) -> StreamField:
    """Same sums as :func:`stream_field_direct`, by zero-padded FFT convolution."""
    g = omega.grid
    if omega.is_zero():
        return StreamField(g, np.zeros(g.shape), "fast")
    n1, n2 = g.n1, g.n2
    P = (2 * n2, 2 * n1)
    kf, ki = _kernel_transforms(g)
    w = omega.values
    psi = np.fft.irfft2(np.fft.rfft2(w, P) * kf, P)[:n2, :n1]
    psi += np.fft.irfft2(np.fft.rfft2(w[::-1], P) * ki, P)[:n2, :n1]
    return StreamField(g, psi, "fast")


def bilinear(a: PatchDensity, b: PatchDensity) -> float:
    """``(1/2) <G a, b>``; equals the energy when ``a is b``."""
    psi = stream_field_fast(a).psi
    return 0.5 * a.grid.cell_area * _fsum(psi * b.values)


def energy(omega: PatchDensity, psi: StreamField | None = None) -> float:
    if psi is None:
        psi = stream_field_fast(omega)
    return 0.5 * omega.grid.cell_area * _fsum(psi.psi * omega.values)


def _phi(u, c):
    # antiderivative in u of log(u^2 + c^2)
    r2 = u * u + c * c
    safe = np.where(r2 > 0, r2, 1.0)
    safe_c = np.where(c != 0, c, 1.0)
    return u * np.log(safe) - 2.0 * u + np.where(c != 0, 2.0 * c * np.arctan(u / safe_c), 0.0)


def horizontal_velocity_on_axis(omega: PatchDensity, x1) -> np.ndarray | float:
    """Horizontal velocity ``d psi / d x2`` of the odd extension on ``x2 = 0``.

    Evaluates ``(1/pi) int omega(y) y2 / ((y1 - x1)^2 + y2^2) dy`` with the
    integral over every cell done in closed form.
    """
    g = omega.grid
    scalar = np.ndim(x1) == 0
    xs = np.atleast_1d(np.asarray(x1, dtype=float))
    X1, X2 = g.mesh()
    nz = omega.values != 0
    w, y1, y2 = omega.values[nz], X1[nz], X2[nz]
    if w.size == 0:
        out = np.zeros(xs.size)
        return float(out[0]) if scalar else out
    a2 = (y2 - 0.5 * g.h2)[None, :]
    b2 = (y2 + 0.5 * g.h2)[None, :]
    ua = (y1 - 0.5 * g.h1)[None, :] - xs[:, None]
    ub = (y1 + 0.5 * g.h1)[None, :] - xs[:, None]
    cell = 0.5 * ((_phi(ub, b2) - _phi(ua, b2)) - (_phi(ub, a2) - _phi(ua, a2)))
    out = (cell @ w) / math.pi
    return float(out[0]) if scalar else out


def nonlocal_axis_quadrature(omega: PatchDensity, x2: float, order: int = 4) -> float:
    """``(1/2pi) int (x2 + y2) / |x - y*|^2 omega(y) dy`` at ``x = (0, x2)``.

    Tensor Gauss-Legendre rule of the given order inside every occupied cell.
    """
    if x2 < 0:
        raise ValueError("x2 must be non-negative")
    g = omega.grid
    X1, X2 = g.mesh()
    nz = omega.values != 0
    w, y1, y2 = omega.values[nz], X1[nz], X2[nz]
    if w.size == 0:
        return 0.0
    t, wt = np.polynomial.legendre.leggauss(order)
    o1 = 0.5 * g.h1 * t
    o2 = 0.5 * g.h2 * t
    q1 = y1[:, None, None] + o1[None, :, None]
    q2 = y2[:, None, None] + o2[None, None, :]
    v = x2 + q2
    f = v / (q1 * q1 + v * v)
    cellint = np.einsum("cab,a,b->c", f, wt, wt) * 0.25 * g.cell_area
    return INV_2PI * float(cellint @ w)


def nonlocal_axis_profile(half_widths, heights, h2: float, x2: float) -> float:
    """``(1/pi) sum_rows h2 arctan(l(y2) / (y2 + x2))`` for a Steiner-symmetric patch."""
    if x2 < 0:
        raise ValueError("x2 must be non-negative")
    lw = np.asarray(half_widths, dtype=float)
    s = np.asarray(heights, dtype=float)
    if lw.size == 0:
        return 0.0
    return h2 * _fsum(np.arctan(lw / (s + x2))) / math.pi
