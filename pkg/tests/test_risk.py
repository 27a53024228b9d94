"""VaR/CVaR against the sorted-tail oracle and basic quantile facts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ammarket import cvar, var
from support import sorted_tail_cvar


def equiprobable(n):
    return np.full(n, 1.0 / n)


def test_var_median_of_uniform_ladder():
    losses = np.arange(1.0, 11.0)
    assert var(losses, equiprobable(10), 0.5) == 5.0


def test_var_alpha_zero_is_min():
    losses = np.array([3.0, -2.0, 7.0])
    assert var(losses, equiprobable(3), 0.0) == -2.0


def test_var_single_scenario():
    assert var([41.5], [1.0], 0.9) == 41.5


def test_cvar_alpha_zero_is_mean():
    losses = np.array([1.0, 2.0, 7.0])
    probs = np.array([0.2, 0.3, 0.5])
    res = cvar(losses, probs, 0.0)
    assert res.cvar == pytest.approx(probs @ losses, rel=1e-12)


def test_cvar_flat_optimum_two_point():
    res = cvar([0.0, 10.0], equiprobable(2), 0.5)
    assert res.cvar == pytest.approx(10.0)
    # theta is the left endpoint of the minimizer interval, the alpha-quantile
    assert res.theta == pytest.approx(0.0)
    assert res.xi == pytest.approx([0.0, 10.0])


def test_cvar_constant_losses():
    res = cvar([5.5, 5.5, 5.5], equiprobable(3), 0.8)
    assert res.cvar == pytest.approx(5.5)


def test_cvar_uniform_ladder_tail_mean():
    res = cvar(np.arange(1.0, 11.0), equiprobable(10), 0.5)
    assert res.cvar == pytest.approx(8.0)  # mean of {6..10}
    assert res.theta == pytest.approx(5.0)


def test_cvar_boundary_atom_split():
    # alpha=0.5 over {0 w.p. 0.9, 10 w.p. 0.1}: tail = 0.1 of 10s + 0.4 of 0s
    res = cvar([0.0, 10.0], [0.9, 0.1], 0.5)
    assert res.cvar == pytest.approx(2.0)


def test_cvar_theta_minimizes_rockafellar_objective():
    rng = np.random.default_rng(3)
    losses = rng.normal(size=40) * 100
    probs = rng.dirichlet(np.ones(40))
    for alpha in (0.0, 0.3, 0.77):
        res = cvar(losses, probs, alpha)
        grid = np.linspace(losses.min() - 1, losses.max() + 1, 2001)
        objective = grid + (probs[None, :] @ np.maximum(losses[None, :] - grid[:, None], 0.0).T).ravel() / (1 - alpha)
        assert res.cvar <= objective.min() + 1e-9


def test_validation_errors():
    with pytest.raises(ValueError):
        var([], [], 0.5)
    with pytest.raises(ValueError):
        var([1.0], [0.5], 0.5)  # probs must sum to 1
    with pytest.raises(ValueError):
        cvar([1.0], [1.0], 1.0)  # alpha < 1


@given(
    data=st.data(),
    n=st.integers(min_value=1, max_value=60),
    alpha=st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.8, 0.95]),
)
@settings(max_examples=200, deadline=None)
def test_cvar_matches_sorted_tail_oracle(data, n, alpha):
    losses = np.array(
        data.draw(
            st.lists(
                st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
                min_size=n,
                max_size=n,
            )
        )
    )
    weights = np.array(data.draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)))
    probs = weights / weights.sum()
    probs = probs / probs.sum()
    expected = sorted_tail_cvar(losses, probs, alpha)
    got = cvar(losses, probs, alpha).cvar
    assert got == pytest.approx(expected, rel=1e-9, abs=1e-9)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=40, deadline=None)
def test_cvar_monotone_in_alpha_and_dominates_var(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 200))
    losses = rng.normal(size=n) * rng.uniform(1, 1e5)
    probs = rng.dirichlet(np.ones(n))
    grid = np.arange(0.0, 0.91, 0.1)
    values = [cvar(losses, probs, a).cvar for a in grid]
    assert all(b >= a - 1e-7 * max(1, abs(a)) for a, b in zip(values, values[1:]))
    for a, value in zip(grid, values):
        v = var(losses, probs, a)
        assert value >= v - 1e-9 * max(1, abs(v))
        assert v >= losses.min() - 1e-12
