"""Unit tests for the gradient flows, their inner solver, and diagnostics."""

import numpy as np
import pytest

import kwcseg.flow as flow_mod
from kwcseg.errors import ConfigError, DivergenceError
from kwcseg.flow import (
    TRACE_COLUMNS,
    FlowParams,
    FlowState,
    dual_heavy_cp_steps,
    edges_above,
    flow_energy,
    jump_census,
    plateau_flatness,
    pre_relax_v,
    run,
    steady_damage_profile,
)
from kwcseg.pwc import GridSignal


def unit_step(n):
    x = np.linspace(0, 1, n)
    return GridSignal((0.0, 1.0), np.where(x < 0.5, 0.0, 1.0))


def accurate_params(model, lam, n, **kw):
    """Solver settings tight enough for descent checks."""
    tau, s = dual_heavy_cp_steps(n)
    kw.setdefault("cp_iters", 20_000)
    kw.setdefault("cp_gap_tol", 1e-11)
    return FlowParams(model=model, lam=lam, n=n, cp_tau=tau, cp_s=s, **kw)


class TestValidation:
    def test_unknown_model(self):
        with pytest.raises(ConfigError):
            FlowParams(model="bogus", lam=1.0, n=50).validate()

    def test_too_few_nodes(self):
        with pytest.raises(ConfigError):
            FlowParams(model="rof", lam=1.0, n=1).validate()

    def test_negative_time_step(self):
        with pytest.raises(ConfigError):
            FlowParams(model="rof", lam=1.0, n=50, dt=-1.0).validate()

    def test_inner_steps_must_be_admissible(self):
        with pytest.raises(ConfigError):
            FlowParams(model="rof", lam=1.0, n=50, cp_tau=1.0, cp_s=1.0).validate()

    def test_unknown_boundary_condition(self):
        with pytest.raises(ConfigError):
            FlowParams(model="rof", lam=1.0, n=50, bc_u="mixed").validate()

    def test_interface_width_must_be_positive(self):
        with pytest.raises(ConfigError):
            FlowParams(model="at", lam=1.0, n=50, epsilon=0.0).validate()

    def test_grid_mismatch(self):
        g = GridSignal((0, 1), np.zeros(50))
        u0 = GridSignal((0, 1), np.zeros(60))
        with pytest.raises(ConfigError):
            run(g, u0, FlowParams(model="rof", lam=1.0, n=50))

    def test_inner_step_rule_is_admissible(self):
        for n in (100, 1000):
            tau, s = dual_heavy_cp_steps(n)
            h = 1.0 / (n - 1)
            assert tau * s * 4 / h**2 == pytest.approx(1.0, rel=1e-12)
            assert tau / s == pytest.approx(0.005, rel=1e-12)


class TestFixedPoints:
    def test_constant_data_is_steady_for_all_models(self):
        n = 101
        g = GridSignal((0.0, 1.0), np.full(n, 0.4))
        for model in ("rof", "at", "kwc"):
            res = run(g, g, FlowParams(model=model, lam=50.0, n=n, t_max=0.5))
            assert res.steady
            np.testing.assert_allclose(res.state.u.samples, g.samples, rtol=0, atol=1e-12)
            if res.state.v is not None:
                assert res.state.v.samples.min() >= 1.0 - 1e-9

    def test_decoupled_damage_leaves_data_fixed(self):
        # With zero coupling the u-equation relaxes straight to the data.
        n = 101
        x = np.linspace(0, 1, n)
        g = GridSignal((0.0, 1.0), np.sin(2 * np.pi * x))
        params = FlowParams(model="at", lam=50.0, n=n, sigma=0.0, t_max=5.0)
        res = run(g, GridSignal((0.0, 1.0), np.zeros(n)), params)
        assert res.steady
        assert np.max(np.abs(res.state.u.samples - g.samples)) <= 1e-8


class TestRofFlow:
    def test_step_data_shrinks_toward_mean(self):
        n = 201
        res = run(unit_step(n), unit_step(n), accurate_params("rof", 50.0, n, t_max=50.0))
        assert res.steady
        u = res.state.u.samples
        lo, hi = u[:20].mean(), u[-20:].mean()
        assert 0.03 < lo < 0.05
        assert 0.95 < hi < 0.97
        census = jump_census(res.state.u, 0.1)
        assert len(census) == 1
        assert census[0][0] == pytest.approx(0.5, abs=0.01)

    def test_contrast_loss_decreases_with_weight(self):
        n = 201
        gaps = []
        for lam in (50.0, 500.0):
            res = run(unit_step(n), unit_step(n), accurate_params("rof", lam, n, t_max=50.0))
            u = res.state.u.samples
            gaps.append(u[:20].mean() + (1.0 - u[-20:].mean()))
        assert gaps[1] < gaps[0] / 5

    def test_trace_layout(self):
        n = 51
        g = GridSignal((0, 1), np.linspace(0, 1, n))
        res = run(g, g, FlowParams(model="rof", lam=20.0, n=n, t_max=0.3))
        assert TRACE_COLUMNS == ("t", "energy", "change_rate", "cp_gap")
        assert res.trace[0][0] == 0.0
        assert all(len(row) == 4 for row in res.trace)
        assert len(res.state.energy_trace) >= 2


class TestDamageModels:
    def test_damage_stays_in_unit_interval(self):
        rng = np.random.default_rng(51)
        n = 151
        g = GridSignal((0.0, 1.0), rng.normal(0.5, 0.4, n))
        for model in ("at", "kwc"):
            res = run(g, g, accurate_params(model, 40.0, n, dt=0.02, t_max=0.4))
            v = res.state.v.samples
            assert v.min() >= 0.0
            assert v.max() <= 1.0

    def test_dirichlet_pins_are_exact_after_every_step(self):
        rng = np.random.default_rng(52)
        n = 101
        g = GridSignal((0.0, 1.0), rng.normal(0.5, 0.3, n))
        params = accurate_params("kwc", 30.0, n, bc_u="dirichlet", t_max=0.05)
        state = FlowState(t=0.0, u=g, v=GridSignal(g.domain, np.ones(n)))
        for _ in range(5):
            state = flow_mod.step_kwc(state, g, params)
            assert state.u.samples[0] == g.samples[0]
            assert state.u.samples[-1] == g.samples[-1]

    def test_damage_dips_at_jump(self):
        eps = 0.01
        n = 1 + int(np.ceil(1.0 / (4 * eps * eps)))
        params = FlowParams(model="kwc", lam=50.0, n=n, epsilon=eps)
        prof = steady_damage_profile(unit_step(n), params)
        # At a unit jump the equilibrium damage is 1/(1+sigma*rho) = 0.5.
        assert prof.samples.min() == pytest.approx(0.5, rel=0.03)
        quarter = prof.samples[: n // 4]
        assert quarter.min() >= 1.0 - 1e-3

    def test_damage_profile_needs_a_damage_model(self):
        with pytest.raises(ConfigError):
            steady_damage_profile(unit_step(201), FlowParams(model="rof", lam=50.0, n=201))

    def test_pre_relax_reaches_equilibrium_and_is_idempotent(self):
        eps = 0.01
        n = 1 + int(np.ceil(1.0 / (4 * eps * eps)))
        g = unit_step(n)
        params = FlowParams(model="kwc", lam=50.0, n=n, epsilon=eps)
        st = FlowState(t=0.0, u=g, v=GridSignal(g.domain, np.ones(n)))
        relaxed = pre_relax_v(st, g, params)
        assert relaxed.v.samples.min() == pytest.approx(0.5, rel=0.03)
        again = pre_relax_v(relaxed, g, params)
        assert np.max(np.abs(again.v.samples - relaxed.v.samples)) <= 1e-9

    def test_pre_relax_on_constant_data_keeps_damage_whole(self):
        n = 201
        g = GridSignal((0.0, 1.0), np.full(n, 0.3))
        params = FlowParams(model="kwc", lam=50.0, n=n)
        st = FlowState(t=0.0, u=g, v=GridSignal(g.domain, np.ones(n)))
        relaxed = pre_relax_v(st, g, params)
        assert relaxed.v.samples.min() >= 1.0 - 1e-9


class TestEnergyDescent:
    def test_no_step_raises_energy_beyond_solver_slack(self):
        rng = np.random.default_rng(53)
        n = 151
        for model in ("rof", "at", "kwc"):
            for seed in (1, 2):
                local = np.random.default_rng(seed)
                g = GridSignal((0.0, 1.0), local.normal(0.5, 0.4, n))
                res = run(g, g, accurate_params(model, 40.0, n, dt=0.02, t_max=0.6))
                energies = [row[1] for row in res.trace]
                for prev, cur in zip(energies, energies[1:]):
                    rise = (cur - prev) / max(abs(cur), 1e-30)
                    assert rise <= 1e-10

    def test_energy_helper_matches_trace(self):
        n = 101
        g = unit_step(n)
        params = accurate_params("kwc", 30.0, n, t_max=0.1)
        res = run(g, g, params)
        h = 1.0 / (n - 1)
        e = flow_energy(
            "kwc", res.state.u.samples, res.state.v.samples, g.samples, h, params
        )
        assert e == pytest.approx(res.trace[-1][1], rel=1e-12)


class TestInnerSolver:
    def test_warm_start_outperforms_cold_when_starved(self):
        n = 200
        g = unit_step(n)
        base = dict(model="rof", lam=50.0, n=n, t_max=0.3, cp_iters=40)
        warm = run(g, g, FlowParams(**base, cp_warm_start=True))
        cold = run(g, g, FlowParams(**base, cp_warm_start=False))
        assert warm.state.cp_gap < cold.state.cp_gap / 5

    def test_gap_reported_small_with_accurate_settings(self):
        n = 201
        res = run(unit_step(n), unit_step(n), accurate_params("rof", 50.0, n, t_max=1.0))
        gaps = [row[3] for row in res.trace[1:]]
        assert max(gaps) <= 1e-8


class TestDivergenceHandling:
    def test_nonfinite_state_raises_with_postmortem(self, monkeypatch):
        rng = np.random.default_rng(54)
        g = GridSignal((0, 1), rng.normal(0.5, 0.5, 50))
        orig = flow_mod._STEPPERS["rof"]

        def corrupting(state, gg, params):
            st = orig(state, gg, params)
            if st.t > 0.05:
                u = st.u.samples.copy()
                u[3] = np.nan
                st.u = GridSignal(gg.domain, u)
            return st

        monkeypatch.setitem(flow_mod._STEPPERS, "rof", corrupting)
        with pytest.raises(DivergenceError) as err:
            run(g, g, FlowParams(model="rof", lam=1.0, n=50, t_max=1.0))
        assert err.value.state is not None
        assert len(err.value.trace) >= 1


class TestCensusTools:
    def test_census_recovers_plateau_structure(self):
        n = 2001
        x = np.linspace(0, 1, n)
        u = GridSignal((0, 1), np.where(x < 0.3, 0.0, np.where(x < 0.7, 0.5, 1.0)))
        census = jump_census(u, 0.1)
        assert len(census) == 2
        assert census[0][0] == pytest.approx(0.3, abs=1e-3)
        assert census[0][1] == pytest.approx(0.5, abs=1e-12)
        assert census[1][0] == pytest.approx(0.7, abs=1e-3)
        assert edges_above(u, 0.1) == 2
        flats = plateau_flatness(u, 0.1)
        assert len(flats) == 3
        assert all(dev == 0.0 for _, _, dev in flats)

    def test_smooth_signal_has_no_census_entries(self):
        n = 1001
        x = np.linspace(0, 1, n)
        u = GridSignal((0, 1), np.sin(2 * np.pi * x))
        assert jump_census(u, 0.1) == []
        assert edges_above(u, 0.1) == 0

    def test_threshold_separates_scales(self):
        n = 1001
        x = np.linspace(0, 1, n)
        u = GridSignal((0, 1), np.where(x < 0.5, 0.0, 1.0) + 0.04 * np.sin(40 * np.pi * x))
        assert edges_above(u, 0.5) == 1


class TestGridRefinement:
    def test_steady_profiles_agree_across_resolutions(self):
        # The same instance solved at two resolutions lands on nearby
        # steady profiles away from the jump.
        results = {}
        for n in (201, 401):
            res = run(unit_step(n), unit_step(n), accurate_params("rof", 50.0, n, t_max=50.0))
            assert res.steady
            results[n] = res.state.u
        coarse, fine = results[201], results[401]
        xs = np.linspace(0.02, 0.45, 50)
        diff = np.abs(np.interp(xs, coarse.x(), coarse.samples) - np.interp(xs, fine.x(), fine.samples))
        assert diff.max() < 5e-3
