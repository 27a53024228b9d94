"""Value-at-risk and conditional value-at-risk over discrete scenario sets."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

_PROB_TOL = 1e-9


class CvarResult(NamedTuple):
    cvar: float
    theta: float
    xi: np.ndarray


def _validated(losses, probs, alpha):
    losses = np.asarray(losses, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if losses.ndim != 1 or losses.size == 0:
        raise ValueError("losses must be a nonempty 1-d array")
    if probs.shape != losses.shape:
        raise ValueError("probs must match losses in shape")
    if np.any(probs < 0):
        raise ValueError("probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > _PROB_TOL:
        raise ValueError(f"probabilities must sum to 1 (got {probs.sum()!r})")
    if not (0.0 <= alpha < 1.0):
        raise ValueError("alpha must lie in [0,1)")
    return losses, probs


def var(losses, probs, alpha: float) -> float:
    """Loss quantile: the smallest loss whose cumulative probability reaches alpha.

    alpha = 0 returns the minimum loss.
    """
    losses, probs = _validated(losses, probs, alpha)
    order = np.argsort(losses, kind="stable")
    cum = np.cumsum(probs[order])
    idx = int(np.searchsorted(cum, alpha - _PROB_TOL, side="left"))
    idx = min(idx, losses.size - 1)
    return float(losses[order][idx])


def cvar(losses, probs, alpha: float) -> CvarResult:
    """Conditional value-at-risk by minimizing theta + E[(L - theta)^+]/(1-alpha).

    The objective is convex and piecewise linear in theta with breakpoints at
    the loss values, so scanning the breakpoints is an exact minimization.
    Returns the minimum, the smallest minimizing theta (which coincides with
    the alpha-quantile), and the per-scenario excess losses (L - theta)^+.
    At alpha = 0 the value collapses to the probability-weighted mean loss.
    """
    losses, probs = _validated(losses, probs, alpha)
    order = np.argsort(losses, kind="stable")
    sl = losses[order]
    sp = probs[order]
    cum_p = np.cumsum(sp)
    cum_pl = np.cumsum(sp * sl)
    tail_p = 1.0 - cum_p  # probability strictly beyond each knot
    tail_pl = cum_pl[-1] - cum_pl
    inv = 1.0 / (1.0 - alpha)
    objective = sl * (1.0 - inv * tail_p) + inv * tail_pl
    best = float(objective.min())
    tol = 1e-12 * max(1.0, abs(best))
    theta = float(sl[np.nonzero(objective <= best + tol)[0][0]])
    xi = np.maximum(losses - theta, 0.0)
    return CvarResult(cvar=best, theta=theta, xi=xi)
