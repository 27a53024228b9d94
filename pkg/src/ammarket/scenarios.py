"""Renewable-availability scenarios from a monthly wind baseline plus filtered noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Synthetic monthly capacity factors, high winter / low summer, in [0.25, 0.40].
# The measured site profile behind the study is not published; this shape stands
# in for it and is flagged as synthetic in the README.
DEFAULT_CAPACITY_FACTORS = np.array(
    [0.40, 0.38, 0.36, 0.33, 0.29, 0.26, 0.25, 0.26, 0.29, 0.33, 0.36, 0.39]
)

DEFAULT_RATED_POWER_MW = 450.0


@dataclass(frozen=True, eq=False)
class WindProfile:
    """Rated capacity and monthly average output of the wind farm, in MW."""

    rated_power: float
    monthly_avg_power: np.ndarray

    def __post_init__(self):
        avg = np.asarray(self.monthly_avg_power, dtype=float)
        object.__setattr__(self, "monthly_avg_power", avg)
        if self.rated_power <= 0:
            raise ValueError("rated_power must be positive")
        if avg.ndim != 1 or avg.size == 0:
            raise ValueError("monthly_avg_power must be a nonempty 1-d array")
        if np.any(avg < 0) or np.any(avg > self.rated_power):
            raise ValueError("monthly averages must lie in [0, rated_power]")

    @property
    def n_periods(self) -> int:
        return self.monthly_avg_power.shape[0]


def default_wind_profile(rated_power: float = DEFAULT_RATED_POWER_MW) -> WindProfile:
    return WindProfile(rated_power, rated_power * DEFAULT_CAPACITY_FACTORS)


@dataclass(frozen=True)
class ScenarioConfig:
    """Settings for one scenario-set draw."""

    n_scenarios: int = 100
    disturbance_bound: float = 45.0
    window: int = 2
    seed: int = 7


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Per-scenario, per-period available renewable energy with probabilities."""

    energy: np.ndarray  # (n_scenarios, n_periods), MWh
    probs: np.ndarray  # (n_scenarios,)
    seed: int
    disturbance_bound: float

    def __post_init__(self):
        e = np.asarray(self.energy, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "energy", e)
        object.__setattr__(self, "probs", p)
        if e.ndim != 2:
            raise ValueError("energy must be a scenario-by-period matrix")
        if p.shape != (e.shape[0],):
            raise ValueError("probs must have one entry per scenario")
        if np.any(e < 0):
            raise ValueError("energies must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("scenario probabilities must sum to 1")

    @property
    def n_scenarios(self) -> int:
        return self.energy.shape[0]

    @property
    def n_periods(self) -> int:
        return self.energy.shape[1]


def moving_average(series, window: int):
    """Trailing moving average; the first window-1 entries average over the prefix."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or series.size == 0:
        raise ValueError("series must be a nonempty 1-d array")
    if window < 1:
        raise ValueError("window must be at least 1")
    cum = np.cumsum(series)
    out = np.empty_like(series)
    n = series.size
    w = min(window, n)
    out[:w] = cum[:w] / np.arange(1, w + 1)
    if n > w:
        out[w:] = (cum[w:] - cum[:-w]) / w
    return out


def energy_available(power: float, hours: float) -> float:
    """MWh delivered by a constant power level over the given duration."""
    if power < 0:
        raise ValueError("power must be nonnegative")
    if hours <= 0:
        raise ValueError("hours must be positive")
    return power * hours


def generate_scenarios(
    profile: WindProfile,
    disturbance_bound: float,
    n_scenarios: int,
    window: int = 2,
    hours_per_period: float = 730.0,
    seed: int = 7,
) -> ScenarioSet:
    """Draw a scenario set of per-period available energy.

    Each scenario adds an iid uniform power disturbance in [-bound, +bound] per
    period, smooths the disturbance series with a trailing moving average of
    the given window, adds it to the monthly baseline, clamps to
    [0, rated_power], and converts MW to MWh. Probabilities are uniform.

    The generator is numpy's seeded PCG64, and disturbances are drawn as
    bound * uniform(-1, 1): one seed therefore yields perfectly correlated
    draws across different bounds, which keeps uncertainty sweeps smooth.
    """
    if disturbance_bound < 0:
        raise ValueError("disturbance_bound must be nonnegative")
    if disturbance_bound > profile.rated_power:
        raise ValueError("disturbance_bound cannot exceed the rated power")
    if n_scenarios < 1:
        raise ValueError("need at least one scenario")
    rng = np.random.default_rng(seed)
    unit = rng.uniform(-1.0, 1.0, size=(n_scenarios, profile.n_periods))
    delta = disturbance_bound * unit
    filtered = np.apply_along_axis(moving_average, 1, delta, window)
    power = np.clip(profile.monthly_avg_power[None, :] + filtered, 0.0, profile.rated_power)
    energy = power * hours_per_period
    probs = np.full(n_scenarios, 1.0 / n_scenarios)
    return ScenarioSet(energy=energy, probs=probs, seed=seed, disturbance_bound=disturbance_bound)
