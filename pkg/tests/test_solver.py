import math

import numpy as np
import pytest

from sadovskii import solver as S
from sadovskii.grid import PatchDensity, build_grid, impulse, mass, patch_from_predicate
from sadovskii.greens import StreamField, energy, stream_field_direct
from sadovskii.solver import (BracketError, Multipliers, SolverConfig, WindowTooSmall,
                              find_multipliers, initialize, level_set_patch, relax_step,
                              rescale, solve)
from sadovskii.symmetry import is_steiner_symmetric


def _synthetic(n1=200, n2=100, L=1.25):
    g = build_grid(n1, n2, L, L)
    X1, X2 = g.mesh()
    return StreamField(g, X2 * (1 - X1 ** 2 - X2 ** 2), "synthetic")


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(mu=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(mu=1.0, tol_e=0.0)
    assert SolverConfig(mu=0.05).nu == 1.0


@pytest.mark.parametrize("mu,r", [(2 / 3, 1.0), (0.486, 0.9)])
def test_initialize_half_disc(mu, r):
    cfg = SolverConfig(mu=mu, n1=200, n2=100, window=1.5)
    p = initialize(cfg)
    assert math.isclose((1.5 * mu) ** (1 / 3), r, rel_tol=1e-12)
    assert abs(impulse(p) - mu) <= 1e-8 * mu
    assert is_steiner_symmetric(p)
    X1, X2 = p.grid.mesh()
    # binary except the impulse-matching tie group, and inside a ring around r
    inside = p.values > 0
    assert np.hypot(X1, X2)[inside].max() <= r + 2 * p.grid.h1
    assert np.hypot(X1, X2)[~inside].min() >= r - 2 * p.grid.h1


def test_initialize_other_shapes(tmp_path):
    cfg = SolverConfig(mu=0.05, init="rectangle")
    p = initialize(cfg)
    assert abs(impulse(p) - 0.05) <= 1e-8 * 0.05
    with pytest.raises(WindowTooSmall):
        initialize(SolverConfig(mu=0.05, window=0.3))


def test_level_set_half_disc():
    psi = _synthetic()
    p = level_set_patch(psi, Multipliers(0.19, 0.0))
    ref = patch_from_predicate(psi.grid, lambda x1, x2: x1 ** 2 + x2 ** 2 < 0.81)
    np.testing.assert_array_equal(p.values, ref.values)


def test_level_set_edge_cases():
    psi = _synthetic()
    assert level_set_patch(psi, Multipliers(0.19, 10.0)).is_zero()
    with pytest.raises(ValueError):
        level_set_patch(psi, Multipliers(0.0, 0.0))
    with pytest.raises(ValueError):
        level_set_patch(psi, Multipliers(0.1, -1.0))


def test_find_multipliers_synthetic():
    psi = _synthetic()
    m, p = find_multipliers(psi, 0.486, S.UNBOUNDED)
    assert m.gamma == 0.0
    assert abs(m.W - 0.19) <= 5e-3
    assert abs(impulse(p) - 0.486) <= 1e-8 * 0.486


def test_find_multipliers_infeasible():
    psi = _synthetic(n1=40, n2=20, L=1.25)
    with pytest.raises(BracketError):
        find_multipliers(psi, 10.0, S.UNBOUNDED)


def test_find_multipliers_mass_cap():
    psi = _synthetic()
    m0, p0 = find_multipliers(psi, 0.3, S.UNBOUNDED)
    cap = 0.8 * mass(p0)
    m, p = find_multipliers(psi, 0.3, cap)
    assert m.gamma > 0
    assert abs(mass(p) - cap) <= 1e-8 * cap
    assert abs(impulse(p) - 0.3) <= 1e-8 * 0.3
    assert m.W > 0


def test_impulse_monotone_in_multipliers():
    psi = _synthetic()
    Ws = np.linspace(0.05, 0.9, 30)
    imps = [impulse(level_set_patch(psi, Multipliers(W, 0.0))) for W in Ws]
    assert np.all(np.diff(imps) <= 0)
    gs = np.linspace(0.0, 0.2, 30)
    imps = [impulse(level_set_patch(psi, Multipliers(0.1, g))) for g in gs]
    assert np.all(np.diff(imps) <= 0)


def test_relax_step_increases_energy():
    cfg = SolverConfig(mu=0.05, nu=1.0)
    p0 = initialize(cfg)
    p1, m, _ = relax_step(p0, cfg)
    assert abs(impulse(p1) - 0.05) <= 1e-8 * 0.05
    assert m.W > 0
    e0 = 0.5 * p0.grid.cell_area * float(np.sum(stream_field_direct(p0).psi * p0.values))
    e1 = 0.5 * p1.grid.cell_area * float(np.sum(stream_field_direct(p1).psi * p1.values))
    assert e1 > e0


def test_relax_step_fixed_point(run_128):
    cfg = run_128.config
    p1, m, _ = relax_step(run_128.patch, cfg)
    diff = p1.grid.cell_area * np.abs(p1.values - run_128.patch.values).sum()
    assert diff <= cfg.tol_a * run_128.mass


def test_zero_budget():
    cfg = SolverConfig(mu=0.05, max_iter=0)
    rep = solve(cfg)
    assert rep.termination == "budget"
    np.testing.assert_array_equal(rep.patch.values, initialize(cfg).values)


def test_run_invariants(run_128):
    rep = run_128
    assert rep.converged
    assert rep.multipliers.gamma == 0.0 and rep.multipliers.W > 0
    for rec in rep.trace:
        assert abs(rec["impulse"] - 0.05) <= 1e-8 * 0.05
        assert rec["mass"] <= 1.0 + 1e-8
    assert rep.residuals["fixed_point"] <= rep.config.tol_a
    assert rep.residuals["binariness"] < 0.03
    # complementary slackness
    m = rep.multipliers
    assert m.gamma * (1.0 - rep.mass) <= 1e-6 * max(m.gamma, m.W)


def test_energy_trace_nondecreasing(run_128, run_256):
    for rep in (run_128, run_256):
        E = [r["E"] for r in rep.trace]
        assert all(b >= a * (1 - rep.config.tol_e) for a, b in zip(E, E[1:]))
        assert rep.residuals["energy_drops"] == 0


def test_detached_run(run_detached):
    rep = run_detached
    assert rep.converged
    assert rep.multipliers.gamma > 0
    assert abs(rep.mass - 1.0) <= 1e-8
    assert not rep.patch.values[0].any()


def test_window_too_small():
    with pytest.raises(WindowTooSmall):
        solve(SolverConfig(mu=0.05, window=0.5))


def test_rescale_identity_and_scaling(run_128):
    p, m = run_128.patch, run_128.multipliers
    q, m1 = rescale(p, m, 0.05, 0.05)
    np.testing.assert_array_equal(q.values, p.values)
    assert m1 == m
    q, m8 = rescale(p, m, 0.05, 0.4)
    assert math.isclose(m8.W, 2 * m.W, rel_tol=1e-14)
    assert math.isclose(energy(q), 16 * energy(p), rel_tol=1e-9)
    assert math.isclose(impulse(q), 0.4, rel_tol=1e-12)
    back, mb = rescale(q, m8, 0.4, 0.05)
    np.testing.assert_array_equal(back.values, p.values)
    assert math.isclose(mb.W, m.W, rel_tol=1e-14)


def test_rescaled_solution_resolves(run_128):
    q, m = rescale(run_128.patch, run_128.multipliers, 0.05, 0.1)
    rep = solve(SolverConfig(mu=0.1))
    assert rep.patch.grid.n1 == q.grid.n1
    diff = rep.patch.grid.cell_area * np.abs(rep.patch.values - q.values).sum()
    assert diff <= rep.config.tol_a * rep.mass
    assert math.isclose(rep.multipliers.W, m.W, rel_tol=1e-9)


def test_period_two_damping(monkeypatch):
    cfg = SolverConfig(mu=0.05, max_iter=6)
    a = initialize(cfg)
    b = initialize(SolverConfig(mu=0.05, init="rectangle"))
    calls = {"n": 0}

    def fake_step(omega, config):
        calls["n"] += 1
        return (b if calls["n"] % 2 else a), Multipliers(0.1, 0.0), None

    monkeypatch.setattr(S, "relax_step", fake_step)
    rep = solve(cfg, initial=a)
    assert any(r["damped"] for r in rep.trace)
    assert rep.termination == "oscillation"


def test_checkpoint_resume_bit_exact(tmp_path, monkeypatch):
    ck = tmp_path / "ck"
    cfg = SolverConfig(mu=0.05, n1=64, n2=32, checkpoint_every=2, checkpoint_dir=str(ck))
    full = solve(SolverConfig(mu=0.05, n1=64, n2=32))

    real = S.relax_step
    calls = {"n": 0}

    def crashing(omega, config):
        calls["n"] += 1
        if calls["n"] == 5:
            raise KeyboardInterrupt
        return real(omega, config)

    monkeypatch.setattr(S, "relax_step", crashing)
    with pytest.raises(KeyboardInterrupt):
        solve(cfg)
    monkeypatch.setattr(S, "relax_step", real)
    resumed = solve(cfg, resume=True)
    np.testing.assert_array_equal(resumed.patch.values, full.patch.values)
    assert resumed.multipliers == full.multipliers
    assert resumed.energy == full.energy
    assert [r["E"] for r in resumed.trace] == [r["E"] for r in full.trace]
