"""Checks of a converged maximiser: identities, boundary, touching, scaling."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import optimize, stats

from .grid import PatchDensity, centroid, mass, impulse, row_mass, _fsum
from .greens import (StreamField, energy, horizontal_velocity_on_axis,
                     nonlocal_axis_profile, stream_at, stream_field_fast)
from .solver import Multipliers, SolverConfig, find_multipliers, solve
from .symmetry import is_steiner_symmetric


class DiagnosticError(ValueError):
    pass


class StudyError(RuntimeError):
    pass


def _require_nonzero(omega: PatchDensity):
    if omega.is_zero():
        raise DiagnosticError("diagnostic undefined for a zero patch")


def _field(omega, psi):
    if psi is not None:
        return psi
    psi = stream_field_fast(omega)
    return psi.symmetrized() if is_steiner_symmetric(omega) else psi


def pohozaev_residual(omega: PatchDensity, m: Multipliers, psi: StreamField | None = None) -> float:
    """``|E - (3/4) W mu - (1/2) gamma |omega|_1| / E``."""
    _require_nonzero(omega)
    E = energy(omega, _field(omega, psi))
    return abs(E - 0.75 * m.W * impulse(omega) - 0.5 * m.gamma * mass(omega)) / E


def speed_formula(omega: PatchDensity, chunk: int = 4096) -> float:
    """Traveling speed from the patch alone: ``|omega|^-1 <(1/2pi)(x2+y2)/|x-y*|^2 omega, omega>``."""
    _require_nonzero(omega)
    g = omega.grid
    X1, X2 = g.mesh()
    nz = omega.values != 0
    w, y1, y2 = omega.values[nz], X1[nz], X2[nz]
    parts = []
    for s in range(0, w.size, chunk):
        u = y1[s:s + chunk, None] - y1[None, :]
        v = y2[s:s + chunk, None] + y2[None, :]
        parts.append(float(w[s:s + chunk] @ ((v / (u * u + v * v)) @ w)))
    total = math.fsum(parts) * g.cell_area ** 2 / (2.0 * math.pi)
    return total / mass(omega)


def speed_cross_check(omega: PatchDensity, m: Multipliers) -> float:
    Wf = speed_formula(omega)
    return abs(m.W - Wf) / abs(Wf)


def central_speed(omega: PatchDensity) -> float:
    """Horizontal velocity at the origin of the odd extension."""
    return horizontal_velocity_on_axis(omega, 0.0)


def central_speed_margin(omega: PatchDensity, m: Multipliers) -> float:
    """``u(0,0) / (2W) - 1``; positive for traveling Steiner-symmetric patches."""
    _require_nonzero(omega)
    if not is_steiner_symmetric(omega):
        raise DiagnosticError("central speed margin needs a Steiner-symmetric patch")
    return central_speed(omega) / (2.0 * m.W) - 1.0


@dataclass
class TouchingReport:
    touching: bool
    radius: float
    first_row_mass: float

    @property
    def verdict(self) -> str:
        return "touching" if self.touching else "detached"


def touching_report(omega: PatchDensity, m: Multipliers, psi: StreamField | None = None) -> TouchingReport:
    """Touching verdict and the largest half-disc at the origin inside ``{Psi > 0}``."""
    _require_nonzero(omega)
    psi = _field(omega, psi)
    g = omega.grid
    X1, X2 = g.mesh()
    Psi = psi.psi - m.W * X2 - m.gamma
    r = np.hypot(X1, X2)
    bad = Psi <= 0
    radius = float(r[bad].min()) if bad.any() else float(r.max())
    # the bad cell itself lies outside; the disc reaches to just short of its centre
    radius = max(radius - 0.5 * math.hypot(g.h1, g.h2), 0.0) if bad.any() else radius
    first = float(row_mass(omega)[0])
    return TouchingReport(m.gamma == 0.0 and first > 0.0, radius, first)


def touching_abscissa(omega: PatchDensity, W: float, samples: int = 200) -> float:
    """Unique positive root of ``u(x1, 0) = W``, checked by sampling for a single sign change."""
    _require_nonzero(omega)
    g = omega.grid
    xs = np.linspace(0.0, g.l1, samples)
    f = horizontal_velocity_on_axis(omega, xs) - W
    changes = np.flatnonzero(np.sign(f[:-1]) != np.sign(f[1:]))
    if f[0] <= 0:
        raise DiagnosticError("axis velocity at the origin does not exceed W; no touching segment")
    if changes.size != 1:
        raise DiagnosticError(f"expected one sign change of u(x1,0) - W on (0, l1), found {changes.size}")
    k = int(changes[0])
    return optimize.brentq(lambda x: horizontal_velocity_on_axis(omega, x) - W,
                           xs[k], xs[k + 1], xtol=1e-14, rtol=1e-14)


@dataclass
class BoundaryCurve:
    """Half-width ``l(s)`` per occupied row and the touching abscissa ``a``."""

    s: np.ndarray
    l: np.ndarray
    half_width: np.ndarray
    residual: np.ndarray
    tolerance: np.ndarray
    a: float
    h1: float
    h2: float

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.s.tolist(), self.l.tolist()))


def boundary_extract(omega: PatchDensity, m: Multipliers, psi: StreamField | None = None) -> BoundaryCurve:
    """Zero crossing of ``psi(., s) - W s - gamma`` along ``x1 > 0`` on every occupied row.

    Crossings are linear interpolations between neighbouring cell centres.
    ``tolerance`` bounds the interpolation error by one eighth of the local
    second difference; ``residual`` is the exact field at the interpolated
    point.
    """
    _require_nonzero(omega)
    if not is_steiner_symmetric(omega):
        raise DiagnosticError("boundary extraction needs a Steiner-symmetric patch")
    psi = _field(omega, psi)
    g = omega.grid
    half = g.n1 // 2
    x1 = g.x1[half:]
    rm = row_mass(omega)
    s_out, l_out, hw_out, tol_out = [], [], [], []
    for j in np.flatnonzero(rm > 0):
        s = g.x2[j]
        f = psi.psi[j, half:] - m.W * s - m.gamma
        hw = 0.5 * rm[j] / g.h2
        if f[0] <= 0:
            if rm[j] > 2 * g.cell_area:
                raise DiagnosticError(f"no boundary crossing on row {j} although it carries "
                                      f"{rm[j] / g.cell_area:.3g} cells")
            # sub-cell cap: fall back to the row's area-equivalent half-width
            l, tol = hw, abs(f[0])
        else:
            neg = np.flatnonzero(f <= 0)
            if neg.size == 0:
                raise DiagnosticError(f"row {j}: level set reaches the window edge")
            k = int(neg[0]) - 1
            t = f[k] / (f[k] - f[k + 1])
            l = x1[k] + t * g.h1
            d2 = [abs(f[q - 1] - 2 * f[q] + f[q + 1]) for q in (k, k + 1)
                  if 1 <= q < f.size - 1]
            tol = max(d2) / 8.0 if d2 else abs(f[k] - f[k + 1])
        s_out.append(s)
        l_out.append(l)
        hw_out.append(hw)
        tol_out.append(tol)
    s_arr, l_arr = np.array(s_out), np.array(l_out)
    vals = stream_at(omega, np.column_stack([l_arr, s_arr])) if s_arr.size else np.zeros(0)
    residual = np.abs(vals - m.W * s_arr - m.gamma)
    a = touching_abscissa(omega, m.W) if m.gamma == 0.0 and rm[0] > 0 else float("nan")
    # floating-point slack on top of the interpolation bound
    tol_arr = np.array(tol_out) + 1e-12 * max(float(np.abs(psi.psi).max()), 1e-300)
    return BoundaryCurve(s_arr, l_arr, np.array(hw_out), residual, tol_arr, a, g.h1, g.h2)


def axis_profile_check(omega: PatchDensity, boundary: BoundaryCurve, heights) -> np.ndarray:
    """Relative gap between the arctan closed form and cellwise quadrature at each height."""
    from .greens import nonlocal_axis_quadrature
    out = []
    for x2 in np.atleast_1d(heights):
        closed = nonlocal_axis_profile(boundary.half_width, boundary.s, boundary.h2, x2)
        quad = nonlocal_axis_quadrature(omega, x2)
        out.append(abs(closed - quad) / abs(quad))
    return np.array(out)


def angle_probe(boundary: BoundaryCurve, rows: int = 5) -> float:
    """Contact angle in degrees from a straight-line fit of ``l(s)`` over the lowest rows."""
    if boundary.s.size < rows:
        raise DiagnosticError(f"angle probe needs at least {rows} boundary samples")
    slope = np.polyfit(boundary.s[:rows], boundary.l[:rows], 1)[0]
    return math.degrees(math.atan2(1.0, -slope))


def axis_height(omega: PatchDensity, m: Multipliers) -> float:
    """Top of the patch on the symmetry axis: root of ``psi(0, s) - W s - gamma``."""
    g = omega.grid
    f = lambda s: float(stream_at(omega, [(0.0, s)])[0]) - m.W * s - m.gamma
    lo = centroid(omega)[1]
    if f(lo) <= 0:
        raise DiagnosticError("centroid height lies outside the level set on the axis")
    return optimize.brentq(f, lo, g.l2, xtol=1e-14, rtol=1e-14)


@dataclass
class ShapeReport:
    max_height: float
    touching_length: float
    area: float
    impulse: float
    centroid_height: float
    normalized_height: float
    normalized_touching_length: float
    normalized_area: float
    normalized_centroid: float
    central_speed: float
    W: float
    gamma: float
    energy: float
    pohozaev: float
    contact_angle_deg: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def shape_report(omega: PatchDensity, m: Multipliers, psi: StreamField | None = None,
                 boundary: BoundaryCurve | None = None) -> ShapeReport:
    """Raw and height-normalised shape numbers of a touching maximiser."""
    _require_nonzero(omega)
    psi = _field(omega, psi)
    tr = touching_report(omega, m, psi)
    if not tr.touching:
        raise DiagnosticError("shape report needs a touching patch (gamma = 0, first row occupied)")
    if boundary is None:
        boundary = boundary_extract(omega, m, psi)
    H = axis_height(omega, m)
    M, P = mass(omega), impulse(omega)
    try:
        angle = angle_probe(boundary)
    except DiagnosticError:
        angle = None
    return ShapeReport(
        max_height=H, touching_length=2 * boundary.a, area=M, impulse=P,
        centroid_height=P / M, normalized_height=H / H,
        normalized_touching_length=2 * boundary.a / H, normalized_area=M / H ** 2,
        normalized_centroid=P / M / H, central_speed=central_speed(omega), W=m.W,
        gamma=m.gamma, energy=energy(omega, psi), pohozaev=pohozaev_residual(omega, m, psi),
        contact_angle_deg=angle)


def support_radius(omega: PatchDensity) -> float:
    g = omega.grid
    X1, X2 = g.mesh()
    return float(np.hypot(X1, X2)[omega.values > 0].max())


def fixed_point_residual(omega: PatchDensity, mu: float, nu: float, psi: StreamField | None = None) -> float:
    """Mass of ``|omega - T(omega)|`` over mass, with ``T`` the multiplier-matched level set."""
    psi = _field(omega, psi)
    _, new = find_multipliers(psi, mu, nu)
    return omega.grid.cell_area * _fsum(np.abs(new.values - omega.values)) / mass(omega)


def binariness(omega: PatchDensity, lo: float = 0.01, hi: float = 0.99) -> float:
    """Fraction of occupied cells holding an intermediate value."""
    v = omega.values
    occupied = v > lo
    if not occupied.any():
        return 0.0
    return float(((v > lo) & (v < hi)).sum() / occupied.sum())


def solve_residuals(report) -> dict:
    omega, m, psi = report.patch, report.multipliers, report.psi
    if omega.is_zero():
        return {}
    cfg = report.config
    return {
        "pohozaev": pohozaev_residual(omega, m, psi),
        "speed_cross_check": speed_cross_check(omega, m),
        "binariness": binariness(omega),
        "fixed_point": fixed_point_residual(omega, cfg.mu, cfg.nu, psi),
        "energy_drops": int(sum(1 for r in report.trace if r["energy_drop"])),
    }


@dataclass
class ScalingStudy:
    rows: list[dict]
    slopes: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)

    BANDS = {"mass": (2 / 3, 0.05), "W": (1 / 3, 0.05), "E": (4 / 3, 0.05), "radius": (1 / 3, 0.07)}

    def within_bands(self) -> dict:
        return {k: abs(self.slopes[k] - c) <= tol for k, (c, tol) in self.BANDS.items()}


def scaling_study(mu_list, config: SolverConfig | None = None) -> ScalingStudy:
    """Solve at each impulse and fit log-log slopes of mass, W, E and support radius."""
    mus = [float(x) for x in mu_list]
    if len(mus) < 3:
        raise StudyError("scaling study needs >= 3 points to fit slopes")
    base = config if config is not None else SolverConfig(mu=mus[0])
    rows = []
    for mu in mus:
        rep = solve(replace(base, mu=mu, window=None, checkpoint_dir=None))
        if not rep.converged:
            raise StudyError(f"solve at mu={mu} did not converge ({rep.termination})")
        if rep.multipliers.gamma != 0.0:
            raise StudyError(f"solve at mu={mu} is detached (gamma={rep.multipliers.gamma:.3g})")
        rows.append({"mu": mu, "mass": rep.mass, "W": rep.multipliers.W, "E": rep.energy,
                     "radius": support_radius(rep.patch), "gamma": rep.multipliers.gamma})
    study = ScalingStudy(rows)
    lx = np.log([r["mu"] for r in rows])
    for k in ("mass", "W", "E", "radius"):
        fit = stats.linregress(lx, np.log([r[k] for r in rows]))
        study.slopes[k] = float(fit.slope)
        study.stderr[k] = float(fit.stderr)
    return study
