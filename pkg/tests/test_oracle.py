"""Unit tests for the discrete global minimizer (dynamic program)."""

import numpy as np
import pytest

from kwcseg.errors import ConfigError
from kwcseg.exact import jump_bounds, uniform_step_minimizer
from kwcseg.kernel import kwc_kernel, potts_kernel
from kwcseg.oracle import (
    OracleProblem,
    best_with_m_jumps,
    sequence_from_result,
    signal_problem,
    solve,
)
from kwcseg.pwc import GridSignal, LinearData, SampledData, energy, quantize

K1 = kwc_kernel(1.0)


def tie_problem(n_cells=100, n_levels=51):
    return OracleProblem(
        data=LinearData((0.0, 1.0)),
        kernel=K1,
        lam=16 / 3,
        n_cells=n_cells,
        n_levels=n_levels,
        endpoint_pin=(0.0, 1.0),
    )


class TestBasicRecovery:
    def test_constant_data_recovered_exactly(self):
        p = OracleProblem(
            data=LinearData((0.0, 1.0), 0.0, 0.5), kernel=K1, lam=1.0, n_cells=50, n_levels=21
        )
        r = solve(p)
        assert r.jump_count == 0
        assert r.minimizer.values == (0.5,)
        assert r.energy.total == pytest.approx(0.0, abs=1e-12)

    def test_planted_step_with_heavy_weight(self):
        x = np.linspace(0, 1, 200)
        g = GridSignal((0.0, 1.0), np.where(x < 0.5, 0.0, 1.0))
        p = signal_problem(g, K1, 1000.0, n_cells=100, n_levels=11)
        r = solve(p)
        assert r.jump_count == 1
        assert r.minimizer.breakpoints == pytest.approx((0.5,), abs=1e-12)
        assert r.minimizer.values == pytest.approx((0.0, 1.0))
        # Data is recovered exactly, so only the jump cost remains.
        assert r.energy.total == pytest.approx(K1.eval(1.0), abs=1e-12)
        assert r.energy.fidelity == pytest.approx(0.0, abs=1e-12)

    def test_best_constant_is_data_mean(self):
        p = OracleProblem(data=LinearData((0.0, 1.0)), kernel=K1, lam=2.0, n_cells=100, n_levels=51)
        r = best_with_m_jumps(p, 0)
        assert r.minimizer.values == pytest.approx((0.5,))
        assert r.energy.total == pytest.approx(1.0 / 12.0, rel=1e-12)


class TestTieInstance:
    def test_two_tied_minimizers_at_critical_weight(self):
        r = solve(tie_problem(), tie_scan_jumps=4)
        counts = {r.jump_count} | {t.jump_count for t in r.ties}
        assert counts == {1, 2}
        assert r.energy.total == pytest.approx(13 / 18, rel=1e-12)
        for t in r.ties:
            assert t.energy.total == pytest.approx(13 / 18, rel=1e-12)

    def test_restricted_minimizers_match_closed_forms(self):
        p = tie_problem()
        r1 = best_with_m_jumps(p, 1)
        assert r1.minimizer.breakpoints == pytest.approx((0.5,))
        assert r1.minimizer.values == pytest.approx((0.0, 1.0))
        r2 = best_with_m_jumps(p, 2)
        assert r2.minimizer.breakpoints == pytest.approx((0.25, 0.75))
        assert r2.minimizer.values == pytest.approx((0.0, 0.5, 1.0))
        assert r1.energy.total == pytest.approx(r2.energy.total, abs=1e-12)

    def test_never_beaten_by_explicit_competitors(self):
        # The dynamic program is a global minimum over its grid, so any
        # grid-representable competitor has at least its energy.
        p = tie_problem(n_cells=400, n_levels=41)
        r = solve(p)
        g = LinearData((0.0, 1.0))
        for m in (1, 2, 4):
            comp = uniform_step_minimizer(1.0, m)
            assert r.energy.total <= energy(comp, g, K1, p.lam).total + 1e-12

    def test_unpinned_beats_quantization(self):
        p = OracleProblem(data=LinearData((0.0, 1.0)), kernel=K1, lam=16 / 3, n_cells=400, n_levels=41)
        r = solve(p)
        comp = quantize(LinearData((0.0, 1.0)), 0.25)
        assert r.energy.total <= energy(comp, LinearData((0.0, 1.0)), K1, p.lam).total + 1e-12

    def test_refinement_never_raises_energy(self):
        # The finer grid contains every coarse-grid candidate.
        coarse = solve(tie_problem(100, 51))
        fine = solve(tie_problem(200, 101))
        assert fine.energy.total <= coarse.energy.total + 1e-12
        assert fine.energy.total == pytest.approx(13 / 18, rel=1e-10)

    def test_tie_scan_skips_infeasible_counts(self):
        p = OracleProblem(
            data=LinearData((0.0, 1.0)),
            kernel=K1,
            lam=16 / 3,
            n_cells=20,
            n_levels=3,
            endpoint_pin=(0.0, 1.0),
        )
        r = solve(p, tie_scan_jumps=5)
        assert all(t.jump_count != 0 for t in r.ties)


class TestMonotoneBattery:
    def test_jump_counts_respect_bounds(self):
        rng = np.random.default_rng(41)
        for lam in (1.0, 5.0, 16 / 3, 20.0):
            for _ in range(3):
                raw = np.abs(rng.normal(size=121))
                samples = np.cumsum(raw)
                samples = (samples - samples[0]) / (samples[-1] - samples[0])
                g = GridSignal((0.0, 1.0), samples)
                p = signal_problem(g, K1, lam, n_levels=61)
                r = solve(p)
                cap = float(samples.max() - samples.min())
                bound = jump_bounds(K1, 0.0, 1.0, lam, mass_cap=cap).jumps_monotone_data
                assert r.jump_count <= bound
                vals = np.asarray(r.minimizer.values)
                assert np.all(np.diff(vals) >= -1e-12)
                assert vals.min() >= samples.min() - 1e-12
                assert vals.max() <= samples.max() + 1e-12


class TestProblemValidation:
    def test_cell_limit(self):
        p = OracleProblem(data=LinearData((0.0, 1.0)), kernel=K1, lam=1.0, n_cells=4000)
        with pytest.raises(ConfigError):
            solve(p)

    def test_level_limit(self):
        p = OracleProblem(data=LinearData((0.0, 1.0)), kernel=K1, lam=1.0, n_cells=50, n_levels=500)
        with pytest.raises(ConfigError):
            solve(p)

    def test_analytic_data_requires_cell_count(self):
        p = OracleProblem(data=LinearData((0.0, 1.0)), kernel=K1, lam=1.0)
        with pytest.raises(ConfigError):
            solve(p)

    def test_infeasible_pinned_jump_count(self):
        p = OracleProblem(
            data=LinearData((0.0, 1.0)),
            kernel=K1,
            lam=1.0,
            n_cells=10,
            n_levels=3,
            endpoint_pin=(0.0, 1.0),
        )
        with pytest.raises(ConfigError):
            best_with_m_jumps(p, 0)

    def test_levels_outside_data_range_rejected(self):
        p = OracleProblem(
            data=LinearData((0.0, 1.0)),
            kernel=K1,
            lam=1.0,
            n_cells=50,
            levels=np.linspace(-1.0, 2.0, 31),
        )
        with pytest.raises(ConfigError):
            solve(p)


class TestResultShape:
    def test_sequence_reconstruction(self):
        p = tie_problem()
        r = solve(p)
        seq = sequence_from_result(r, p)
        assert len(seq) == 100
        assert seq[0] == pytest.approx(0.0)
        assert seq[-1] == pytest.approx(1.0)
        levels = p.resolved_levels()
        assert np.all(np.isin(seq, levels))

    def test_json_dict_shape(self):
        r = solve(tie_problem(), tie_scan_jumps=3)
        d = r.to_json_dict()
        assert set(d) == {"minimizer", "energy", "jump_count", "ties"}
        assert set(d["minimizer"]) == {"domain", "breakpoints", "values"}
        assert all(set(t) == {"minimizer", "energy", "jump_count", "ties"} for t in d["ties"])

    def test_flat_kernel_supported(self):
        p = OracleProblem(
            data=LinearData((0.0, 1.0)),
            kernel=potts_kernel(0.2),
            lam=20.0,
            n_cells=100,
            n_levels=41,
        )
        r = solve(p)
        # A flat per-jump charge of 0.2 beats the constant's fidelity 20/24.
        assert r.jump_count >= 1
        assert r.energy.total < 20.0 / 24.0
        assert np.isfinite(r.energy.total)
