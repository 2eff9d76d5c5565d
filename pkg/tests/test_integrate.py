import math

import numpy as np
import pytest

from conftest import random_field
from peridyn_fd.errors import BlowUpError, ConfigError, NonconvergenceError
from peridyn_fd.force import BondModel
from peridyn_fd.grid import build_grid, l2_norm
from peridyn_fd.integrate import (SchemeConfig, State, energy_stability_report, forward_euler_step,
                                  run_simulation, stability_constant, theta_step)
from peridyn_fd.potential import cbar


@pytest.fixture(scope="module")
def setup1d():
    g = build_grid(1, 1.0, 0.05, 0.2)
    m = BondModel(g)
    return g, m, cbar(m.potential, m.influence, 1, h_over_eps=g.h / g.eps)


def test_zero_state_stays_zero(setup1d):
    g, m, cb = setup1d
    for th in (0.0, 0.5, 1.0):
        cfg = SchemeConfig(0.001, 0.01, th)
        tr = run_simulation(g.zeros(), g.zeros(), m, cfg, cbar=cb)
        assert np.all(tr.final.u == 0.0) and np.all(tr.final.v == 0.0)
        assert np.all(tr.energies == 0.0)


def test_first_step_from_rest_is_dt2_body(setup1d):
    g, m, _ = setup1d
    b = random_field(g, np.random.default_rng(0), 1.0)
    dt = 0.01
    s = forward_euler_step(State(g.zeros(), g.zeros()), m, dt, lambda t: b)
    np.testing.assert_allclose(s.u, dt * dt * b, rtol=1e-15)
    np.testing.assert_allclose(s.v, dt * b, rtol=1e-15)


def test_forward_scheme_is_central_difference(setup1d):
    g, m, _ = setup1d
    rng = np.random.default_rng(1)
    s0 = State(random_field(g, rng, 0.05), random_field(g, rng, 0.1))
    dt = 0.002
    s1 = forward_euler_step(s0, m, dt)
    s2 = forward_euler_step(s1, m, dt)
    lhs = (s2.u - 2 * s1.u + s0.u) / dt**2
    np.testing.assert_allclose(lhs, m.force(s1.u), atol=1e-8 * np.max(np.abs(lhs)) + 1e-10)


def test_theta_zero_delegates_exactly(setup1d):
    g, m, cb = setup1d
    rng = np.random.default_rng(2)
    u0, v0 = random_field(g, rng, 0.05), random_field(g, rng, 0.1)
    b = random_field(g, rng, 1.0)
    a = run_simulation(u0, v0, m, SchemeConfig(0.001, 0.02, 0.0), body=lambda t: b * math.cos(t))
    s = State(u0.copy(), v0.copy())
    for k in range(20):
        s = forward_euler_step(s, m, 0.001, lambda t: b * math.cos(t))
        s.t = (k + 1) * 0.001
    assert np.array_equal(a.final.u, s.u) and np.array_equal(a.final.v, s.v)


def test_picard_contraction_rate(setup1d):
    g, m, cb = setup1d
    rng = np.random.default_rng(3)
    s0 = State(random_field(g, rng, 0.05), random_field(g, rng, 0.5))
    dt = 0.2 * g.eps**2 / cb
    cfg = SchemeConfig(dt, dt, 1.0, tol_fp=1e-14)
    hist = []
    theta_step(s0, m, cfg, cbar=cb, history=hist)
    k = cfg.contraction(cb, g.eps)
    ratios = [b / a for a, b in zip(hist, hist[1:]) if a > 1e-13]
    assert ratios and max(ratios) <= k * (1 + 1e-6) + dt  # Gauss-Seidel sweep adds O(dt) in v


def test_picard_iterations_decrease_with_dt(setup1d):
    g, m, cb = setup1d
    rng = np.random.default_rng(4)
    s0 = State(random_field(g, rng, 0.05), random_field(g, rng, 0.5))
    its = []
    for dt in (2e-3, 5e-4, 1e-4):
        its.append(theta_step(s0, m, SchemeConfig(dt, dt, 1.0), cbar=cb).fp_iters)
    assert its[0] >= its[1] >= its[2]


def test_crank_nicolson_local_error_order(setup1d):
    g, m, cb = setup1d
    rng = np.random.default_rng(5)
    s0 = State(random_field(g, rng, 0.02), random_field(g, rng, 0.2))

    def advance(dt, n):
        cfg = SchemeConfig(dt, dt * n, 0.5, tol_fp=1e-15, max_fp_iters=200)
        s = s0
        for _ in range(n):
            s = theta_step(s, m, cfg, cbar=cb)
        return s

    errs = []
    for dt in (4e-3, 2e-3):
        ref = advance(dt / 100, 100)
        one = advance(dt, 1)
        errs.append(l2_norm(one.u - ref.u, g) + l2_norm(one.v - ref.v, g))
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.1)


def test_mirror_symmetry_preserved():
    g = build_grid(1, 1.0, 0.05, 0.2)
    m = BondModel(g)
    x = g.coords()[..., 0]
    u0 = (0.05 * np.sin(2 * np.pi * x))[..., None]
    tr = run_simulation(u0, np.zeros_like(u0), m, SchemeConfig(0.001, 0.05))
    u = tr.final.u[..., 0]
    np.testing.assert_allclose(u[::-1], -u, atol=1e-12)


def test_incommensurate_T_rejected():
    with pytest.raises(ConfigError):
        SchemeConfig(0.003, 0.01).num_steps
    for bad in (dict(dt=0.0, T=1.0), dict(dt=0.1, T=1.0, theta=1.5), dict(dt=0.1, T=1.0, rho=2.0)):
        with pytest.raises(ConfigError):
            SchemeConfig(**bad)


def test_implicit_needs_contraction(setup1d):
    g, m, cb = setup1d
    cfg = SchemeConfig(0.05, 0.1, 1.0)
    with pytest.raises(ConfigError):
        run_simulation(g.zeros(), g.zeros(), m, cfg, cbar=cb)
    with pytest.raises(ConfigError):
        run_simulation(g.zeros(), g.zeros(), m, SchemeConfig(0.001, 0.01, 1.0))


def test_runs_are_deterministic(setup1d):
    g, m, cb = setup1d
    rng = np.random.default_rng(6)
    u0, v0 = random_field(g, rng, 0.05), random_field(g, rng, 0.1)
    cfg = SchemeConfig(0.001, 0.01, 0.5)
    a = run_simulation(u0, v0, m, cfg, cbar=cb)
    b = run_simulation(u0, v0, m, cfg, cbar=cb)
    assert np.array_equal(a.final.u, b.final.u) and a.rows == b.rows


def test_blow_up_reported(setup1d):
    g, m, _ = setup1d
    nan = np.full(g.shape + (1,), np.nan)
    with pytest.raises(BlowUpError) as ei:
        run_simulation(g.zeros(), g.zeros(), m, SchemeConfig(0.001, 0.005), body=lambda t: nan)
    assert ei.value.step == 1 and ei.value.exit_code == 3


def test_nonconvergence_reported(setup1d):
    g, m, cb = setup1d
    rng = np.random.default_rng(7)
    s0 = State(random_field(g, rng, 0.05), random_field(g, rng, 0.5))
    cfg = SchemeConfig(0.001, 0.001, 1.0, tol_fp=1e-16, max_fp_iters=2)
    with pytest.raises(NonconvergenceError) as ei:
        theta_step(s0, m, cfg, cbar=cb)
    assert ei.value.exit_code == 4 and ei.value.iterations == 2


def test_energy_report_constant_and_bound():
    g = build_grid(2, 1.0, 0.05, 0.2)
    m = BondModel(g)
    assert stability_constant(m) == pytest.approx(4 * math.sqrt(2) * math.exp(-0.5) * 4 / 3, rel=1e-8)
    assert stability_constant(m) == pytest.approx(4.5747, abs=1e-4)
    rng = np.random.default_rng(8)
    tr = run_simulation(random_field(g, rng, 0.05), g.zeros(), m, SchemeConfig(0.001, 0.02),
                        snapshot_every=5)
    rep = energy_stability_report(tr, m)
    assert rep.holds and rep.margin > 0
    assert [r["step"] for r in tr.rows] == [0, 5, 10, 15, 20]
    assert len(tr.times) == 21


def test_trajectory_csv(tmp_path, setup1d):
    g, m, _ = setup1d
    tr = run_simulation(random_field(g, np.random.default_rng(9), 0.05), g.zeros(), m,
                        SchemeConfig(0.001, 0.003))
    p = tmp_path / "t.csv"
    tr.write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "step,t,energy,kinetic,potential,max_strain,softening_fraction"
    assert len(lines) == 5
