"""Unit tests for jump-cost kernels, their structural conditions, and split costs."""

import math

import numpy as np
import pytest

from kwcseg.errors import ConfigError
from kwcseg.kernel import (
    JumpKernel,
    check_conditions,
    derive_constants,
    kwc_kernel,
    linear_kernel,
    potts_kernel,
    split_cost,
    split_cost_derivative,
)


class TestKwcKernelValues:
    def test_reference_points(self):
        k = kwc_kernel(1.0)
        assert k.eval(0.0) == 0.0
        assert k.eval(1.0) == pytest.approx(0.5, abs=1e-15)
        assert k.eval(3.0) == pytest.approx(0.75, abs=1e-15)

    def test_closed_form_matches_generic_kappa(self):
        rng = np.random.default_rng(11)
        for kappa in (0.5, 1.0, 2.0):
            k = kwc_kernel(kappa)
            s = rng.uniform(0.0, 10.0, size=200)
            expected = s / (1.0 + kappa * s)
            np.testing.assert_allclose(k.eval(s), expected, rtol=0, atol=1e-14)

    def test_bounded_below_inverse_kappa(self):
        for kappa in (0.5, 1.0, 2.0):
            k = kwc_kernel(kappa)
            s = np.linspace(0.0, 1e6, 1000)
            assert np.all(k.eval(s) < 1.0 / kappa + 1e-12)

    def test_monotone_nondecreasing(self):
        rng = np.random.default_rng(12)
        k = kwc_kernel(1.3)
        s = np.sort(rng.uniform(0.0, 20.0, size=500))
        vals = k.eval(s)
        assert np.all(np.diff(vals) >= -1e-15)

    def test_vanishing_slope_gap_near_zero(self):
        # |K(r)/r - 1| <= kappa * r: the per-unit cost approaches the unit
        # slope at small jumps at a linear rate.
        for kappa in (0.5, 1.0, 2.0):
            k = kwc_kernel(kappa)
            for r in (1e-1, 1e-3, 1e-6):
                assert abs(k.eval(r) / r - 1.0) <= kappa * r + 1e-15

    def test_kernel_is_frozen_dataclass(self):
        k = kwc_kernel(1.0)
        with pytest.raises(Exception):
            k.kappa = 2.0

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ConfigError):
            kwc_kernel(0.0)
        with pytest.raises(ConfigError):
            kwc_kernel(-1.0)
        with pytest.raises(ConfigError):
            potts_kernel(0.0)
        with pytest.raises(ConfigError):
            JumpKernel(kind="mystery")


class TestDerivedConstants:
    def test_values_at_mass_cap_two(self):
        c = derive_constants(kwc_kernel(1.0), 2.0)
        assert c.split_gain == pytest.approx(1.0 / 3.0, abs=1e-3)
        assert c.linear_floor == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert c.bound_rate == pytest.approx(1.0 / 6.0, abs=1e-3)
        assert c.diagonal_candidate == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_values_at_mass_cap_one(self):
        c = derive_constants(kwc_kernel(1.0), 1.0)
        assert c.split_gain == pytest.approx(2.0 / 3.0, abs=1e-3)
        assert c.linear_floor == pytest.approx(0.5, abs=1e-12)
        assert c.bound_rate == pytest.approx(0.5, abs=1e-3)

    def test_bound_rate_combines_components_exactly(self):
        for cap in (0.5, 1.0, 2.0, 4.0):
            c = derive_constants(kwc_kernel(1.0), cap)
            assert c.bound_rate == min(c.linear_floor / cap, c.split_gain)

    def test_split_gain_attained_on_diagonal(self):
        # For this kernel family the worst split of the cap is the even one.
        for kappa in (0.5, 1.0, 2.0):
            c = derive_constants(kwc_kernel(kappa), 2.0)
            assert c.split_gain == pytest.approx(c.diagonal_candidate, rel=1e-2)

    def test_linear_floor_uses_cap_endpoint(self):
        k = kwc_kernel(1.0)
        for cap in (0.5, 1.0, 3.0):
            c = derive_constants(k, cap)
            assert c.linear_floor == pytest.approx(k.eval(cap) / cap, abs=1e-12)


class TestStrengthenedSubadditivity:
    def test_pairwise_gain_battery(self):
        # K(a) + K(b) >= K(a+b) + C * a * b for all pairs below the cap.
        rng = np.random.default_rng(101)
        cap = 2.0
        for kappa in (0.5, 1.0, 2.0):
            k = kwc_kernel(kappa)
            gain = derive_constants(k, cap).split_gain
            a = rng.uniform(0.0, cap, size=10_000)
            b = rng.uniform(0.0, cap - a)
            lhs = k.eval(a) + k.eval(b)
            rhs = k.eval(a + b) + gain * a * b
            assert np.all(lhs >= rhs - 1e-12)

    def test_multi_part_splits(self):
        # Splitting one jump into up to 10 parts pays at least the pairwise
        # gain summed over all cross terms.
        rng = np.random.default_rng(102)
        cap = 2.0
        k = kwc_kernel(1.0)
        gain = derive_constants(k, cap).split_gain
        for _ in range(1_000):
            parts = rng.integers(2, 11)
            raw = rng.uniform(0.0, 1.0, size=parts)
            sizes = raw / raw.sum() * rng.uniform(0.1, cap)
            total = sizes.sum()
            cross = (total**2 - np.sum(sizes**2)) / 2.0
            assert np.sum(k.eval(sizes)) >= k.eval(total) + gain * cross - 1e-10

    def test_linear_kernel_lacks_gain(self):
        rep = check_conditions(linear_kernel(), 2.0)
        assert rep.subadditive is True
        assert rep.strengthened_subadditive is False
        assert rep.split_gain is None
        assert rep.unit_slope_at_zero is True

    def test_potts_kernel_lacks_unit_slope(self):
        rep = check_conditions(potts_kernel(1.0), 2.0)
        assert rep.strengthened_subadditive is True
        assert rep.unit_slope_at_zero is False
        assert rep.slope_at_zero > 1e6

    def test_kwc_kernel_passes_all_conditions(self):
        rep = check_conditions(kwc_kernel(1.0), 2.0)
        assert rep.monotone
        assert rep.subadditive
        assert rep.strengthened_subadditive
        assert rep.unit_slope_at_zero
        assert rep.linear_floor_positive
        assert rep.slope_at_zero == pytest.approx(1.0, abs=1e-6)


class TestSplitCost:
    def test_symmetric_point(self):
        # Cost of a jump pair with common size c and imbalance z.
        k = kwc_kernel(1.0)
        assert split_cost(k, 1.0, 0.0) == pytest.approx(2 * k.eval(1.0), abs=1e-15)
        assert split_cost(k, 1.0, 0.5) == pytest.approx(k.eval(1.5) + k.eval(0.5), abs=1e-15)

    def test_derivative_zero_at_even_split(self):
        k = kwc_kernel(1.0)
        assert split_cost_derivative(k, 1.0, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_derivative_reference_value(self):
        k = kwc_kernel(1.0)
        assert split_cost_derivative(k, 1.0, 0.5) == pytest.approx(
            -0.28444444444444444, abs=1e-14
        )

    def test_derivative_matches_finite_differences(self):
        rng = np.random.default_rng(103)
        k = kwc_kernel(1.0)
        for _ in range(100):
            c = rng.uniform(0.3, 3.0)
            z = rng.uniform(0.05 * c, 0.9 * c)
            eps = 1e-6 * c
            fd = (split_cost(k, c, z + eps) - split_cost(k, c, z - eps)) / (2 * eps)
            assert split_cost_derivative(k, c, z) == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_even_split_is_strict_maximum(self):
        # Imbalance strictly lowers the cost of a split pair.
        k = kwc_kernel(1.0)
        for c in (0.5, 1.0, 2.0):
            zs = np.linspace(0.0, 0.95 * c, 40)
            costs = split_cost(k, c, zs)
            assert np.all(np.diff(costs) < 0)

    def test_derivative_magnitude_grows_superlinearly(self):
        # -Q'(mu * z) <= -mu * Q'(z): the slope decays no slower than linearly.
        rng = np.random.default_rng(104)
        k = kwc_kernel(1.0)
        for _ in range(500):
            c = rng.uniform(0.3, 3.0)
            z = rng.uniform(0.05 * c, 0.95 * c)
            mu = rng.uniform(0.05, 1.0)
            lhs = -split_cost_derivative(k, c, mu * z)
            rhs = -mu * split_cost_derivative(k, c, z)
            assert lhs <= rhs + 1e-12

    def test_quarter_point_slope_below_half_midpoint_slope(self):
        k = kwc_kernel(1.0)
        assert -split_cost_derivative(k, 1.0, 0.25) < 0.5 * (
            -split_cost_derivative(k, 1.0, 0.5)
        )
