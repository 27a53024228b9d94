"""Scenario generation: determinism, clamping, filtering, and mean preservation."""

import numpy as np
import pytest

from ammarket import (
    WindProfile,
    default_wind_profile,
    energy_available,
    generate_scenarios,
    moving_average,
)


class TestMovingAverage:
    def test_trailing_window_two(self):
        assert moving_average([10.0, 20.0, 30.0], 2) == pytest.approx([10.0, 15.0, 25.0])

    def test_constant_series_unchanged(self):
        assert moving_average([7.0] * 5, 3) == pytest.approx([7.0] * 5)

    def test_window_one_identity(self):
        series = [3.0, -1.0, 4.0]
        assert moving_average(series, 1) == pytest.approx(series)

    def test_window_longer_than_series(self):
        assert moving_average([2.0, 4.0], 10) == pytest.approx([2.0, 3.0])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            moving_average([], 2)


class TestEnergyAvailable:
    def test_partial_load(self):
        assert energy_available(450 * 0.3, 730) == pytest.approx(98_550.0)

    def test_zero_power(self):
        assert energy_available(0.0, 730) == 0.0

    def test_full_load(self):
        assert energy_available(450.0, 730.0) == pytest.approx(328_500.0)


class TestGenerateScenarios:
    def test_zero_bound_reproduces_baseline(self):
        profile = default_wind_profile()
        ss = generate_scenarios(profile, 0.0, 5, window=2, hours_per_period=730.0, seed=1)
        expected = profile.monthly_avg_power * 730.0
        for w in range(5):
            assert ss.energy[w] == pytest.approx(expected)

    def test_shapes_and_probs(self):
        ss = generate_scenarios(default_wind_profile(), 45.0, 100, seed=3)
        assert ss.energy.shape == (100, 12)
        assert ss.probs == pytest.approx(np.full(100, 0.01))

    def test_determinism_bitwise(self):
        a = generate_scenarios(default_wind_profile(), 45.0, 50, seed=11)
        b = generate_scenarios(default_wind_profile(), 45.0, 50, seed=11)
        assert np.array_equal(a.energy, b.energy)
        assert np.array_equal(a.probs, b.probs)

    def test_different_seeds_differ(self):
        a = generate_scenarios(default_wind_profile(), 45.0, 50, seed=11)
        b = generate_scenarios(default_wind_profile(), 45.0, 50, seed=12)
        assert not np.array_equal(a.energy, b.energy)

    def test_disturbance_within_filtered_band(self):
        # the filtered disturbance is a convex combination of bounded draws
        profile = default_wind_profile()
        ss = generate_scenarios(profile, 45.0, 200, seed=5, hours_per_period=730.0)
        power = ss.energy / 730.0
        lo = np.maximum(profile.monthly_avg_power - 45.0, 0.0)
        hi = np.minimum(profile.monthly_avg_power + 45.0, profile.rated_power)
        assert np.all(power >= lo[None, :] - 1e-9)
        assert np.all(power <= hi[None, :] + 1e-9)

    def test_clamped_to_physical_range(self):
        profile = WindProfile(100.0, np.array([5.0, 95.0]))
        ss = generate_scenarios(profile, 80.0, 500, window=1, hours_per_period=1.0, seed=2)
        assert np.all(ss.energy >= 0.0)
        assert np.all(ss.energy <= 100.0)

    def test_bound_larger_than_rated_rejected(self):
        with pytest.raises(ValueError):
            generate_scenarios(default_wind_profile(), 451.0, 5, seed=0)

    def test_mean_preservation_against_baseline(self):
        """With the base profile the +/-45 MW disturbance rarely clips, so the
        scenario mean tracks the baseline within 3 standard errors."""
        profile = default_wind_profile()
        n = 2000
        ss = generate_scenarios(profile, 45.0, n, seed=9, hours_per_period=730.0)
        power = ss.energy / 730.0
        se = power.std(axis=0, ddof=1) / np.sqrt(n)
        diff = np.abs(power.mean(axis=0) - profile.monthly_avg_power)
        assert np.all(diff <= 3.0 * se + 1e-9)

    def test_common_random_numbers_across_bounds(self):
        """One seed scales the same unit draws, so bounds sweep smoothly."""
        profile = default_wind_profile()
        lo = generate_scenarios(profile, 10.0, 20, seed=4, hours_per_period=1.0)
        hi = generate_scenarios(profile, 20.0, 20, seed=4, hours_per_period=1.0)
        d_lo = lo.energy - profile.monthly_avg_power[None, :]
        d_hi = hi.energy - profile.monthly_avg_power[None, :]
        assert d_hi == pytest.approx(2.0 * d_lo, rel=1e-12, abs=1e-9)
