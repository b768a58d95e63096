"""One test per acceptance criterion; each prints a PASS/FAIL line in the summary."""
import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from sadovskii import diagnostics as D
from sadovskii.grid import PatchDensity, build_grid, shift_cells
from sadovskii.greens import energy, stream_field_direct, stream_field_fast
from sadovskii.symmetry import steiner_symmetrize


def record(n, name, checks):
    """checks: list of (label, ok, detail)."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{lab} {det}" for lab, _, det in checks)
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} [{n}] {name}: {detail}")
    bad = [lab for lab, good, _ in checks if not good]
    assert not bad, f"criterion {n} failed: {bad}"


def _rel(x, ref):
    return abs(x - ref) / abs(ref)


def _shape_checks(rep, tol):
    s = D.shape_report(rep.patch, rep.multipliers, rep.psi)
    out = []
    for lab, val, ref in (("2a/H", s.normalized_touching_length, 3.398),
                          ("area/H^2", s.normalized_area, 2.47),
                          ("centroid/H", s.normalized_centroid, 0.415)):
        out.append((lab, _rel(val, ref) <= tol, f"{val:.4f} ({_rel(val, ref):.1%} vs {tol:.0%})"))
    return out


def test_c1_shape_256(run_256):
    assert run_256.converged
    record("1", "shape at 256x128", _shape_checks(run_256, 0.05))


def test_c1_shape_128(run_128):
    assert run_128.converged
    record("1b", "shape at 128x64", _shape_checks(run_128, 0.08))


def test_c2_pohozaev(run_128, run_256):
    p128, p256 = run_128.residuals["pohozaev"], run_256.residuals["pohozaev"]
    record("2", "Pohozaev identity", [
        ("128x64", p128 <= 0.02, f"{p128:.2e} <= 2e-2"),
        ("256x128", p256 < p128, f"{p256:.2e} < {p128:.2e}"),
    ])


def test_c3_speed_triangulation(run_128):
    W = run_128.multipliers.W
    Wf = D.speed_formula(run_128.patch)
    We = 4.0 / 3.0 * run_128.energy / run_128.config.mu
    vals = {"multiplier": W, "formula": Wf, "energy": We}
    checks = []
    names = list(vals)
    for i in range(3):
        for j in range(i + 1, 3):
            a, b = vals[names[i]], vals[names[j]]
            r = abs(a - b) / max(abs(a), abs(b))
            checks.append((f"{names[i]}/{names[j]}", r <= 0.02, f"{r:.2e}"))
    record("3", "speed triangulation", checks)


def test_c4_central_speed(run_128):
    rep = run_128
    margin = D.central_speed_margin(rep.patch, rep.multipliers)
    b = D.boundary_extract(rep.patch, rep.multipliers, rep.psi)
    heights = np.linspace(0.0, 1.2 * float(b.s.max()), 20)
    gaps = D.axis_profile_check(rep.patch, b, heights)
    record("4", "central speed", [
        ("u(0,0)/2W-1", margin > 0, f"{margin:.3f} > 0"),
        ("arctan vs quadrature", float(gaps.max()) <= 1e-3, f"max {gaps.max():.2e} <= 1e-3 at 20 heights"),
    ])


def test_c5_touching(run_128):
    rep = run_128
    tr = D.touching_report(rep.patch, rep.multipliers, rep.psi)
    record("5", "touching and flux", [
        ("converged", rep.converged, rep.termination),
        ("gamma", rep.multipliers.gamma == 0.0, f"{rep.multipliers.gamma}"),
        ("mass", rep.mass < 1.0, f"{rep.mass:.4f} < 1"),
        ("first row", tr.first_row_mass > 0, f"{tr.first_row_mass:.3e} > 0"),
        ("half-disc radius", tr.radius > 0, f"{tr.radius:.3f} > 0"),
    ])


@pytest.mark.slow
def test_c6_scaling():
    st = D.scaling_study([0.0125, 0.025, 0.05, 0.1])
    ok = st.within_bands()
    record("6", "scaling exponents", [
        (k, ok[k], f"{st.slopes[k]:.4f} ({c:.4f} +/- {tol})") for k, (c, tol) in st.BANDS.items()
    ])


def test_c7_properties(run_64, run_128):
    checks = []
    # fast vs direct field
    p = run_64.patch
    fast, direct = stream_field_fast(p).psi, stream_field_direct(p).psi
    r = float(np.abs(fast - direct).max() / np.abs(direct).max())
    checks.append(("fast/direct", r <= 1e-10, f"{r:.1e}"))
    # Steiner monotonicity
    rng = np.random.default_rng(7)
    g = build_grid(64, 32, 1.0, 1.0)
    worst = math.inf
    for _ in range(200):
        q = PatchDensity(g, rng.random(g.shape) * (rng.random(g.shape) < rng.random()))
        worst = min(worst, energy(steiner_symmetrize(q)) - energy(q))
    checks.append(("Steiner", worst >= -1e-9, f"min gain {worst:.2e}"))
    # aligned dilation by 2 scales energy by 2^4
    big = PatchDensity(p.grid.scaled(2.0), p.values)
    r = abs(energy(big) / energy(p) / 16.0 - 1.0)
    checks.append(("r^-4", r <= 1e-3, f"{r:.1e}"))
    # whole-cell translation
    r = abs(energy(shift_cells(p, 5)) / energy(p) - 1.0)
    checks.append(("translation", r <= 1e-10, f"{r:.1e}"))
    # boundary identity and touching point
    b = D.boundary_extract(run_128.patch, run_128.multipliers, run_128.psi)
    worst = float(np.max(b.residual / b.tolerance))
    checks.append(("boundary", worst <= 1.0, f"residual/tolerance {worst:.2f}"))
    d = abs(b.l[0] - b.a) / b.h1
    checks.append(("|l0-a|", d <= 2.0, f"{d:.3f} h1"))
    record("7", "property suites", checks)


def test_c8_mass_cap(run_128, run_128_uncapped):
    a, b = run_128, run_128_uncapped
    diff = a.patch.grid.cell_area * float(np.abs(a.patch.values - b.patch.values).sum())
    record("8", "mass-cap equivalence", [
        ("|w1-winf|_1", diff <= a.config.tol_a * a.mass, f"{diff:.2e} <= tol_A*mass"),
        ("both converged", a.converged and b.converged, f"{a.termination}/{b.termination}"),
    ])
