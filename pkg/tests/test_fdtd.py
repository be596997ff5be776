import numpy as np
import pytest

from emenclosure.fdtd import (BackgroundStore, ConfigurationError, E_COMPONENTS,
                              GridSpec, H_COMPONENTS, InstabilityError,
                              YeeSimulation, build_grid, causality_slack,
                              grid_c_max, leapfrog_energy,
                              run_background_with_store, run_scattered,
                              run_simulation)
from emenclosure.geometry import Sphere
from emenclosure.materials import BackgroundMedium, ObstacleSpec
from emenclosure.source import PolyRamp, SourceSpec

MED = BackgroundMedium()


def small_source(T=1.0, a=(0.0, 1.0, 0.0)):
    return SourceSpec(p=(0.0, 0.0, 0.0), eta=0.11, a=a, pulse=PolyRamp(t_rise=0.3),
                      T=T)


def test_build_grid_basics():
    g = build_grid(((-1, -1, -1), (1, 1, 1)), h=0.1, T=2.0, c_max=1.0)
    assert g.n == (20, 20, 20)
    assert g.dt <= 0.5 * 0.1 / np.sqrt(3) + 1e-15
    assert g.n_steps * g.dt >= 2.0 - 1e-12
    g.validate_cfl(1.0)
    with pytest.raises(ConfigurationError):
        g.validate_cfl(3.0)  # faster medium violates the CFL bound


def test_grid_c_max():
    assert grid_c_max(MED, None) == pytest.approx(1.0)
    fast = ObstacleSpec(shape=Sphere((0.6, 0, 0), 0.1), e_pert=-0.75)
    assert grid_c_max(MED, fast) == pytest.approx(2.0)


def test_causality_slack_signs():
    g = build_grid(((-2, -2, -2), (2, 2, 2)), h=0.1, T=1.0, c_max=1.0)
    src = small_source()
    assert causality_slack(g, src, None, 1.0, 1.0) > 0
    # record longer than the round trip to the nearest face
    assert causality_slack(g, src, None, 5.0, 1.0) < 0


def test_trace_weights_sum_to_ball_volume():
    g = build_grid(((-1, -1, -1), (1, 1, 1)), h=0.05, T=0.5, c_max=1.0)
    src = small_source()
    res = run_simulation(MED, None, src, g)
    assert res.trace.weights.sum() == pytest.approx(src.ball_volume, rel=1e-12)
    assert np.all(np.linalg.norm(res.trace.sample_points, axis=1) < src.eta)


def random_interior_fields(sim, rng):
    for c in E_COMPONENTS + H_COMPONENTS:
        sim.state.fields[c][...] = rng.standard_normal(sim.state.fields[c].shape)
    # zero tangential E on the PEC walls so the random state is admissible
    for comp, axes in (("Ex", (1, 2)), ("Ey", (0, 2)), ("Ez", (0, 1))):
        arr = sim.state.fields[comp]
        for ax in axes:
            sl = [slice(None)] * 3
            sl[ax] = 0
            arr[tuple(sl)] = 0.0
            sl[ax] = -1
            arr[tuple(sl)] = 0.0


def step_energies(sim, n):
    ep = {c: sim.state.fields[c].copy() for c in E_COMPONENTS}
    hp = {c: sim.state.fields[c].copy() for c in H_COMPONENTS}
    out = []
    for _ in range(n):
        sim.step()
        out.append(leapfrog_energy(sim.state, ep, hp))
        for c in E_COMPONENTS:
            np.copyto(ep[c], sim.state.fields[c])
        for c in H_COMPONENTS:
            np.copyto(hp[c], sim.state.fields[c])
    return np.array(out)


def test_lossless_energy_conserved(rng):
    g = GridSpec(lo=(0, 0, 0), n=(20, 20, 20), h=0.1,
                 dt=0.45 * 0.1 / np.sqrt(3), n_steps=1)
    sim = YeeSimulation(MED, g)
    random_interior_fields(sim, rng)
    e = step_energies(sim, 40)
    assert np.max(np.abs(np.diff(e)) / e[0]) < 1e-12


def test_conductive_energy_decays(rng):
    med = BackgroundMedium(sigma0=0.5)
    g = GridSpec(lo=(0, 0, 0), n=(20, 20, 20), h=0.1,
                 dt=0.45 * 0.1 / np.sqrt(3), n_steps=1)
    sim = YeeSimulation(med, g)
    random_interior_fields(sim, rng)
    e = step_energies(sim, 40)
    assert np.all(np.diff(e) <= 1e-12 * e[0])
    assert e[-1] < 0.9 * e[0]


def test_post_pulse_energy_non_increase():
    g = build_grid(((-1, -1, -1), (1, 1, 1)), h=0.1, T=1.6, c_max=1.0)
    src = small_source(T=1.6)
    sim = YeeSimulation(MED, g, source=src)
    t_off = src.pulse.t_rise + src.pulse.ease
    while sim.state.t < t_off + 0.1:
        sim.step()
    sim._source_plan = None  # source off; PEC box, sigma = 0
    e = step_energies(sim, 30)
    assert np.max(np.diff(e)) <= 1e-10 * e[0]


def test_instability_above_cfl(rng):
    limit = 0.1 / np.sqrt(3)
    g = GridSpec(lo=(0, 0, 0), n=(16, 16, 16), h=0.1, dt=1.1 * limit, n_steps=1)
    sim = YeeSimulation(MED, g, cfl_limit=1.2)
    random_interior_fields(sim, rng)
    with pytest.raises(InstabilityError):
        for _ in range(2000):
            sim.step()


def test_numerical_causality_one_cell():
    g = build_grid(((-1.5, -1.5, -1.5), (1.5, 1.5, 1.5)), h=0.05, T=1.0, c_max=1.0)
    src = small_source(T=1.0)
    sim = YeeSimulation(MED, g, source=src)
    while sim.state.t < 0.8:
        sim.step()
    ex = sim.state.fields["Ey"]
    xs, ys, zs = g.component_axes("Ey")
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    r = np.sqrt(X**2 + Y**2 + Z**2)
    peak = np.max(np.abs(ex))
    front = src.eta + MED.wave_speed * sim.state.t
    beyond = np.abs(ex[r > front + g.h]) / peak
    assert np.max(beyond) < 1e-3


def test_scattered_equals_total_minus_background():
    obs = ObstacleSpec(shape=Sphere((0.55, 0.0, 0.0), 0.2), e_pert=1.5)
    g = build_grid(((-1.2, -1.2, -1.2), (1.45, 1.2, 1.2)), h=0.08, T=1.8,
                   c_max=grid_c_max(MED, obs))
    src = small_source(T=1.8)
    total = run_simulation(MED, obs, src, g)
    bg = run_background_with_store(MED, obs, src, g)
    sc = run_scattered(MED, obs, src, g, bg.store)
    direct = total.trace.series - bg.trace.series
    scale = np.max(np.abs(direct))
    np.testing.assert_allclose(sc.trace.series, direct, atol=1e-9 * scale)


def test_scattered_rejects_foreign_store():
    obs = ObstacleSpec(shape=Sphere((0.55, 0.0, 0.0), 0.2), e_pert=1.5)
    g1 = build_grid(((-1.2, -1.2, -1.2), (1.45, 1.2, 1.2)), h=0.08, T=1.0,
                    c_max=grid_c_max(MED, obs))
    g2 = build_grid(((-1.2, -1.2, -1.2), (1.45, 1.2, 1.2)), h=0.1, T=1.0,
                    c_max=grid_c_max(MED, obs))
    src = small_source(T=1.0)
    bg = run_background_with_store(MED, obs, src, g1)
    with pytest.raises((ConfigurationError, Exception)):
        run_scattered(MED, obs, src, g2, bg.store)


def test_background_store_roundtrip(tmp_path):
    obs = ObstacleSpec(shape=Sphere((0.55, 0.0, 0.0), 0.2), e_pert=1.5)
    g = build_grid(((-1.2, -1.2, -1.2), (1.45, 1.2, 1.2)), h=0.12, T=0.6,
                   c_max=grid_c_max(MED, obs))
    src = small_source(T=0.6)
    bg = run_background_with_store(MED, obs, src, g)
    path = tmp_path / "store.npz"
    bg.store.save(path)
    loaded = BackgroundStore.load(path)
    sc1 = run_scattered(MED, obs, src, g, bg.store)
    sc2 = run_scattered(MED, obs, src, g, loaded)
    np.testing.assert_array_equal(sc1.trace.series, sc2.trace.series)


def test_run_is_deterministic():
    g = build_grid(((-1, -1, -1), (1, 1, 1)), h=0.1, T=0.8, c_max=1.0)
    src = small_source(T=0.8)
    r1 = run_simulation(MED, None, src, g)
    r2 = run_simulation(MED, None, src, g)
    np.testing.assert_array_equal(r1.trace.series, r2.trace.series)


def test_mur_boundary_absorbs():
    # same physical scene; PEC needs causality slack, Mur lets the wave leave
    src = small_source(T=2.4)
    g_small = build_grid(((-0.9, -0.9, -0.9), (0.9, 0.9, 0.9)), h=0.06, T=2.4,
                         c_max=1.0)
    with pytest.raises(ConfigurationError):
        run_simulation(MED, None, src, g_small)  # PEC reflection returns
    res_mur = run_simulation(MED, None, src, g_small, boundary="mur")
    g_big = build_grid(((-1.8, -1.8, -1.8), (1.8, 1.8, 1.8)), h=0.06, T=2.4,
                       c_max=1.0)
    res_ref = run_simulation(MED, None, src, g_big)
    scale = np.max(np.abs(res_ref.trace.series))
    err = np.max(np.abs(res_mur.trace.series - res_ref.trace.series)) / scale
    assert err < 0.05


def test_source_ball_must_clear_obstacle():
    obs = ObstacleSpec(shape=Sphere((0.1, 0.0, 0.0), 0.2), e_pert=1.0)
    g = build_grid(((-1, -1, -1), (1, 1, 1)), h=0.1, T=0.5, c_max=grid_c_max(MED, obs))
    with pytest.raises(Exception):
        run_simulation(MED, obs, small_source(T=0.5), g)
