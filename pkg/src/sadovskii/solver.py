"""Energy maximisation under an impulse constraint by level-set relaxation.

One relaxation step computes the stream function of the current patch,
chooses the multipliers ``(W, gamma)`` so that the super-level set
``{psi - W x2 - gamma > 0}`` carries the prescribed impulse (and respects the
mass cap), and Steiner-symmetrises the result.  A fixed point of the step is
a patch of the form ``1{psi[omega] - W x2 - gamma > 0}``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .grid import (HalfPlaneGrid, PatchDensity, build_grid, impulse, mass,
                   touches_window_edge)
from .greens import StreamField, energy, stream_field_fast
from .io import read_patch, write_patch
from .symmetry import is_steiner_symmetric, steiner_symmetrize

log = logging.getLogger(__name__)

UNBOUNDED = math.inf


class SolverError(RuntimeError):
    pass


class BracketError(SolverError):
    """The field cannot produce the requested impulse inside the window."""


class MultiplierAnomaly(SolverError):
    """Mass or impulse failed to be monotone in a multiplier."""


class WindowTooSmall(SolverError):
    pass


@dataclass(frozen=True)
class Multipliers:
    W: float
    gamma: float = 0.0


@dataclass
class SolverConfig:
    mu: float
    nu: float = 1.0
    n1: int = 128
    n2: int = 64
    window: float | None = None
    impulse_tol: float = 1e-8
    tol_e: float = 1e-9
    tol_a: float = 1e-6
    max_iter: int = 500
    init: str = "half-disc"
    seed: int = 0
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        for name in ("impulse_tol", "tol_e", "tol_a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.window is not None and not self.window > 0:
            raise ValueError("window must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")

    @property
    def window_size(self) -> float:
        # support radius scales like mu^(1/3)
        return self.window if self.window is not None else 4.0 * self.mu ** (1.0 / 3.0)

    def grid(self) -> HalfPlaneGrid:
        L = self.window_size
        return build_grid(self.n1, self.n2, L, L)


@dataclass
class SolveReport:
    patch: PatchDensity
    multipliers: Multipliers
    energy: float
    impulse: float
    mass: float
    trace: list[dict]
    residuals: dict
    termination: str
    config: SolverConfig
    psi: StreamField | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.termination == "converged"


def _fill(key: np.ndarray, weight: np.ndarray, target: float):
    """Take cells in decreasing ``key`` until their weights sum to ``target``.

    Cells tied with the marginal key share one common fraction, so mirror
    pairs stay mirror pairs.  Returns ``(values, marginal_key)``.
    """
    k = key.ravel()
    wt = weight.ravel()
    order = np.argsort(-k, kind="stable")
    cum = np.cumsum(wt[order])
    if cum.size == 0 or cum[-1] < target:
        raise BracketError(f"available impulse {cum[-1] if cum.size else 0.0:.6g} "
                           f"is below the target {target:.6g}")
    p = int(np.searchsorted(cum, target))
    p = min(p, cum.size - 1)
    v = k[order[p]]
    full = k > v
    tie = k == v
    rem = target - math.fsum(wt[full].tolist())
    frac = rem / math.fsum(wt[tie].tolist())
    out = full.astype(np.float64)
    out[tie] = min(max(frac, 0.0), 1.0)
    return out.reshape(key.shape), float(v)


def level_set_patch(psi: StreamField, m: Multipliers) -> PatchDensity:
    """Indicator of ``{psi - W x2 - gamma > 0}`` at cell centres."""
    if not m.W > 0:
        raise ValueError(f"W must be positive, got {m.W}")
    if m.gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {m.gamma}")
    g = psi.grid
    inside = psi.psi - m.W * g.x2[:, None] - m.gamma > 0
    return PatchDensity(g, inside.astype(np.float64))


def _branch(psi: StreamField, mu: float, gamma: float):
    g = psi.grid
    x2 = g.x2[:, None] * np.ones((1, g.n1))
    key = (psi.psi - gamma) / x2
    values, W = _fill(key, x2 * g.cell_area, mu)
    if not W > 0:
        raise BracketError(f"impulse {mu:.6g} needs a non-positive speed (gamma={gamma:.6g})")
    return values, W, g.cell_area * math.fsum(values.ravel().tolist())


def find_multipliers(psi: StreamField, mu: float, nu: float = UNBOUNDED,
                     mass_tol: float = 1e-10) -> tuple[Multipliers, PatchDensity]:
    """Multipliers and patch maximising ``<psi, omega>`` at impulse ``mu``, mass <= ``nu``.

    For fixed ``gamma`` the speed ``W`` is the exact breakpoint at which the
    level set reaches impulse ``mu`` (cells ranked by ``(psi - gamma)/x2``, the
    marginal cells taking a fractional value).  If the ``gamma = 0`` set is
    heavier than ``nu``, ``gamma`` is bisected until the mass equals ``nu``.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    g = psi.grid
    values, W, m0 = _branch(psi, mu, 0.0)
    if m0 <= nu:
        return Multipliers(W, 0.0), PatchDensity(g, values)

    # largest gamma keeping impulse mu reachable with psi > gamma
    flat = psi.psi.ravel()
    x2 = (g.x2[:, None] * np.ones((1, g.n1))).ravel()
    order = np.argsort(-flat, kind="stable")
    cum = np.cumsum(x2[order] * g.cell_area)
    p = int(np.searchsorted(cum, mu))
    if p >= cum.size:
        raise BracketError("impulse target exceeds what the window can hold")
    # cells 0..p alone carry impulse mu, so W stays positive below psi[p]
    below = flat[flat < flat[order[p]]]
    nxt = float(below.max()) if below.size else 0.0
    g_hi = max(0.5 * (float(flat[order[p]]) + nxt), 0.0)
    lo, hi = 0.0, g_hi
    v_lo, W_lo, m_lo = values, W, m0
    v_hi, W_hi, m_hi = _branch(psi, mu, hi)
    if m_hi > nu:
        raise BracketError(f"mass cap {nu:.6g} cannot be met at impulse {mu:.6g} "
                           f"(minimum reachable mass {m_hi:.6g})")
    for _ in range(200):
        if hi - lo <= 1e-15 * max(hi, 1e-300) or m_lo - m_hi <= mass_tol * nu:
            break
        mid = 0.5 * (lo + hi)
        v_mid, W_mid, m_mid = _branch(psi, mu, mid)
        if m_mid > m_lo * (1 + 1e-12) or m_mid < m_hi * (1 - 1e-12):
            raise MultiplierAnomaly(f"mass not monotone in gamma near {mid:.6g}")
        if m_mid > nu:
            lo, v_lo, W_lo, m_lo = mid, v_mid, W_mid, m_mid
        else:
            hi, v_hi, W_hi, m_hi = mid, v_mid, W_mid, m_mid
    # blend the two bracketing level sets; both carry impulse mu
    t = 1.0 if m_lo == m_hi else (nu - m_hi) / (m_lo - m_hi)
    t = min(max(t, 0.0), 1.0)
    out = np.clip(t * v_lo + (1.0 - t) * v_hi, 0.0, 1.0)
    return Multipliers(t * W_lo + (1 - t) * W_hi, 0.5 * (lo + hi)), PatchDensity(g, out)


def initialize(config: SolverConfig, grid: HalfPlaneGrid | None = None) -> PatchDensity:
    """Impulse-matched half-disc (or square) centred on the origin."""
    g = grid if grid is not None else config.grid()
    X1, X2 = g.mesh()
    if config.init == "half-disc":
        size = (1.5 * config.mu) ** (1.0 / 3.0)
        key = -(X1 * X1 + X2 * X2)
    elif config.init == "rectangle":
        size = config.mu ** (1.0 / 3.0)
        key = -np.maximum(np.abs(X1), X2)
    else:
        omega = read_patch(config.init)
        if omega.grid != g:
            raise SolverError(f"initial patch {config.init} is on a different grid")
        return omega
    if size >= min(g.l1, g.l2) - g.h2:
        raise WindowTooSmall(f"initial radius {size:.4g} does not fit the window "
                             f"[{-g.l1:.4g}, {g.l1:.4g}] x (0, {g.l2:.4g}]")
    values, _ = _fill(key, X2 * g.cell_area, config.mu)
    return steiner_symmetrize(PatchDensity(g, values))


def relax_step(omega: PatchDensity, config: SolverConfig):
    """One fixed-point step; returns ``(new_patch, multipliers, psi_of_old)``."""
    psi = stream_field_fast(omega)
    if is_steiner_symmetric(omega):
        psi = psi.symmetrized()
    m, new = find_multipliers(psi, config.mu, config.nu)
    return steiner_symmetrize(new), m, psi


def _symdiff(a: PatchDensity, b: PatchDensity) -> float:
    return a.grid.cell_area * math.fsum(np.abs(a.values - b.values).ravel().tolist())


def _save_checkpoint(dirpath: Path, it: int, omega, prev, m, trace):
    dirpath.mkdir(parents=True, exist_ok=True)
    write_patch(dirpath / "checkpoint_patch.bin", omega)
    if prev is not None:
        write_patch(dirpath / "checkpoint_prev.bin", prev)
    state = {"iteration": it, "W": m.W if m else None, "gamma": m.gamma if m else None,
             "has_prev": prev is not None, "trace": trace}
    tmp = dirpath / "checkpoint.json.tmp"
    tmp.write_text(json.dumps(state))
    tmp.replace(dirpath / "checkpoint.json")


def _load_checkpoint(dirpath: Path):
    state = json.loads((dirpath / "checkpoint.json").read_text())
    omega = read_patch(dirpath / "checkpoint_patch.bin")
    prev = read_patch(dirpath / "checkpoint_prev.bin") if state["has_prev"] else None
    m = Multipliers(state["W"], state["gamma"]) if state["W"] is not None else None
    return state["iteration"], omega, prev, m, state["trace"]


def solve(config: SolverConfig, initial: PatchDensity | None = None,
          resume: bool = False) -> SolveReport:
    grid = config.grid() if initial is None else initial.grid
    ckdir = Path(config.checkpoint_dir) if config.checkpoint_dir else None
    if resume:
        if ckdir is None or not (ckdir / "checkpoint.json").exists():
            raise SolverError("resume requested but no checkpoint found")
        start, omega, prev, m, trace = _load_checkpoint(ckdir)
    else:
        omega = initial if initial is not None else initialize(config, grid)
        start, prev, m, trace = 0, None, None, []

    E = energy(omega)
    mu_ref = config.mu
    termination = "budget"
    for it in range(start, config.max_iter):
        new, m, _ = relax_step(omega, config)
        E_new = energy(new)
        M_new = mass(new)
        dA = _symdiff(new, omega) / M_new
        dE = abs(E_new - E) / E_new
        rec = {"iter": it + 1, "E": E_new, "W": m.W, "gamma": m.gamma, "mass": M_new,
               "impulse": impulse(new), "symdiff": dA, "energy_drop": E_new < E * (1 - config.tol_e),
               "damped": False}
        if abs(rec["impulse"] - mu_ref) > config.impulse_tol * mu_ref:
            raise SolverError(f"impulse drifted to {rec['impulse']!r} at iteration {it + 1}")
        if rec["energy_drop"]:
            log.debug("energy decreased at iteration %d: %r -> %r", it + 1, E, E_new)
        if dE < config.tol_e and dA < config.tol_a:
            trace.append(rec)
            prev, omega, E = omega, new, E_new
            termination = "converged"
            break
        if prev is not None and dA >= config.tol_a and _symdiff(new, prev) <= config.tol_a * M_new:
            # period-2 cycle: continue from the mean of the two states
            new = steiner_symmetrize(new.with_values(0.5 * (new.values + omega.values)))
            E_new = energy(new)
            rec["damped"] = True
        trace.append(rec)
        prev, omega, E = omega, new, E_new
        if ckdir is not None and config.checkpoint_every and (it + 1) % config.checkpoint_every == 0:
            _save_checkpoint(ckdir, it + 1, omega, prev, m, trace)

    if termination == "budget" and trace and any(r["damped"] for r in trace[-10:]):
        termination = "oscillation"
    if touches_window_edge(omega):
        raise WindowTooSmall(f"patch support reaches the window edge (window={grid.l1:.4g}); "
                             "enlarge the window")

    psi = stream_field_fast(omega)
    if is_steiner_symmetric(omega):
        psi = psi.symmetrized()
    if m is None:
        m, _ = find_multipliers(psi, config.mu, config.nu)
    report = SolveReport(omega, m, energy(omega, psi), impulse(omega), mass(omega), trace,
                         {}, termination, config, psi)
    from .diagnostics import solve_residuals
    report.residuals = solve_residuals(report)
    return report


def rescale(omega: PatchDensity, m: Multipliers, mu_from: float, mu_to: float):
    """Dilate a solution from impulse ``mu_from`` to ``mu_to``.

    Cell values are kept and the grid is stretched by ``s = (mu_to/mu_from)^(1/3)``;
    speeds scale by ``s``, the flux constant by ``s^2`` and the energy by ``s^4``.
    """
    if not (mu_from > 0 and mu_to > 0):
        raise ValueError("impulses must be positive")
    if mu_to == mu_from:
        return omega.with_values(omega.values), Multipliers(m.W, m.gamma)
    s = (mu_to / mu_from) ** (1.0 / 3.0)
    return PatchDensity(omega.grid.scaled(s), omega.values), Multipliers(m.W * s, m.gamma * s * s)


def config_dict(config: SolverConfig) -> dict:
    d = asdict(config)
    if math.isinf(d["nu"]):
        d["nu"] = "inf"
    return d
