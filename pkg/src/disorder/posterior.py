"""Exact Bayesian filter for the change time and the kernel pair.

The filter state after n observations is

    eta_n = (window, change_prob, pair_prob)

where `window` holds the last min(n, d+1) + 1 symbols, change_prob[i, j] is
P(change happened by n | pair (i, j), data) and pair_prob[i, j] is
P(pair (i, j) | data).  The state evolves by a one-step Bayes update per
observation; multi-step, back-shift and lagged variants expose the same
posterior through window marginals and are used to cross-check the recursion.

Zero-probability observations (outside the common kernel support) raise
SupportError rather than being renormalised away; under the model assumptions
they cannot occur, so they signal a model violation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SupportError
from .likelihood import (
    Window,
    likelihood_ratio_chain,
    mixture_marginal,
    mixture_marginal_origin,
    split_likelihoods,
    window_changed,
    window_changed_origin,
    window_marginal,
    window_marginal_origin,
)
from .model import ModelSpec

_DENOM_FLOOR = 1e-300


@dataclass(frozen=True)
class PosteriorState:
    """Filter state: time index, trailing window and per-pair posteriors."""

    n: int
    window: Window
    change_prob: np.ndarray
    pair_prob: np.ndarray


def change_step(
    spec: ModelSpec, i: int, j: int, prev: float, x_prev: int, x_next: int, n: int
) -> float:
    """One-step update of P(change by n | pair, data).

    The first step uses the initial hazard pi; later steps use the geometric
    hazard q = 1 - p applied to the previous posterior.
    """
    if not 0.0 <= prev <= 1.0:
        raise ValueError("previous posterior must lie in [0, 1]")
    if n < 1:
        raise ValueError("n must be at least 1")
    f0 = float(spec.pre_kernels[i, x_prev, x_next])
    f1 = float(spec.post_kernels[j, x_prev, x_next])
    p = float(spec.p[i, j])
    if n == 1:
        pi = float(spec.pi[i, j])
        num = f1 * pi
        den = num + f0 * (1.0 - pi)
    else:
        q = 1.0 - p
        num = f1 * (q + p * prev)
        den = num + f0 * p * (1.0 - prev)
    if den < _DENOM_FLOOR:
        raise SupportError(f"observation {x_next} outside common support after {x_prev}")
    return num / den


def change_multistep(
    spec: ModelSpec, i: int, j: int, l: int, window: Window, anchor: float
) -> float:
    """Posterior after l + 1 steps given the posterior at the window start.

    Valid when the anchor sits strictly inside the sequence (time >= 1); the
    anchored-at-origin case is change_from_origin.
    """
    if not 0.0 <= anchor <= 1.0:
        raise ValueError("anchor posterior must lie in [0, 1]")
    den = window_marginal(spec, i, j, l, window, anchor)
    if den < _DENOM_FLOOR:
        raise SupportError("window has zero probability under the common support")
    return window_changed(spec, i, j, l, window, anchor) / den


def change_from_origin(spec: ModelSpec, i: int, j: int, window: Window) -> float:
    """Posterior after len(window) - 1 steps starting from time 0.

    The window must start at the fixed initial symbol; the initial hazard
    pi[i, j] replaces an anchor posterior.
    """
    l = len(window) - 2
    if l < 0:
        raise ValueError("window must contain at least two symbols")
    pi = float(spec.pi[i, j])
    den = window_marginal_origin(spec, i, j, l, window, pi)
    if den < _DENOM_FLOOR:
        raise SupportError("window has zero probability under the common support")
    return window_changed_origin(spec, i, j, l, window, pi) / den


def change_backshift(spec: ModelSpec, i: int, j: int, window: Window, current: float) -> float:
    """Recover the posterior d + 1 steps back from the current one.

    Inverts the (d+1)-step forward map on the same window; `window` must have
    length d + 2 and `current` is the posterior at its last symbol.
    """
    if len(window) != spec.d + 2:
        raise ValueError(f"window must have length {spec.d + 2}")
    if not 0.0 <= current <= 1.0:
        raise ValueError("current posterior must lie in [0, 1]")
    splits = split_likelihoods(spec, i, j, window)
    p = float(spec.p[i, j])
    q = 1.0 - p
    geo = 0.0
    for k in range(spec.d + 1):
        geo = geo * p + splits[k + 1]
    g = q * geo
    tail = p ** (spec.d + 1) * splits[0]
    top = splits[spec.d + 1]
    num = (1.0 - current) * g - current * tail
    den = (1.0 - current) * (g - top) - current * tail
    if abs(den) < _DENOM_FLOOR:
        raise SupportError("degenerate window: back-shift denominator vanished")
    return num / den


def change_lagged(spec: ModelSpec, i: int, j: int, k: int, window: Window, current: float) -> float:
    """P(change happened at least k + 1 steps before now | pair, data).

    Expressed through the current posterior and the likelihood ratios of the
    last k + 1 transitions; `window` must supply at least k + 1 transitions
    and the current time n must satisfy n >= k + 2 for the expression to be
    exact (at n = k + 1 the probability is identically 0).
    """
    if k < 0:
        raise ValueError("lag must be non-negative")
    if len(window) < k + 2:
        raise ValueError(f"window must supply at least {k + 1} transitions")
    p = float(spec.p[i, j])
    q = 1.0 - p
    chain = likelihood_ratio_chain(spec, window, k + 1)
    return 1.0 - (1.0 - current) * (1.0 + q * float(chain[i, j]))


def pair_step(
    spec: ModelSpec,
    x_prev: int,
    x_next: int,
    prev_pair: np.ndarray,
    prev_change: np.ndarray,
    n: int,
) -> np.ndarray:
    """One-step update of the posterior over kernel pairs.

    Both posteriors are read from the same pre-update snapshot; the first
    step reweights the prior b by the origin-anchored window density.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    w = (x_prev, x_next)
    num = np.empty((spec.l0, spec.l1))
    if n == 1:
        for i, j in spec.pairs():
            num[i, j] = spec.b[i, j] * window_marginal_origin(
                spec, i, j, 0, w, float(spec.pi[i, j])
            )
    else:
        for i, j in spec.pairs():
            num[i, j] = prev_pair[i, j] * window_marginal(
                spec, i, j, 0, w, float(prev_change[i, j])
            )
    total = float(num.sum())
    if total < _DENOM_FLOOR:
        raise SupportError(f"observation {x_next} outside common support after {x_prev}")
    return num / total


def state_init(spec: ModelSpec) -> PosteriorState:
    """Filter state at time 0: only x0 seen, change impossible, prior pairs."""
    return PosteriorState(
        n=0,
        window=(spec.x0,),
        change_prob=np.zeros((spec.l0, spec.l1)),
        pair_prob=spec.b.copy(),
    )


def state_step(spec: ModelSpec, state: PosteriorState, x_next: int) -> PosteriorState:
    """Advance the filter by one observation, trimming the window to d + 2."""
    if not 0 <= x_next < spec.alphabet_size:
        raise ValueError(f"symbol {x_next} outside alphabet")
    n = state.n + 1
    x_prev = state.window[-1]
    change = np.empty((spec.l0, spec.l1))
    for i, j in spec.pairs():
        change[i, j] = change_step(
            spec, i, j, float(state.change_prob[i, j]), x_prev, x_next, n
        )
    pair = pair_step(spec, x_prev, x_next, state.pair_prob, state.change_prob, n)
    window = state.window + (x_next,)
    if len(window) > spec.d + 2:
        window = window[-(spec.d + 2) :]
    return PosteriorState(n=n, window=window, change_prob=change, pair_prob=pair)


def predictive(spec: ModelSpec, state: PosteriorState) -> np.ndarray:
    """One-step predictive distribution of the next symbol given the state."""
    x = state.window[-1]
    out = np.empty(spec.alphabet_size)
    if state.n == 0:
        for y in range(spec.alphabet_size):
            out[y] = mixture_marginal_origin(spec, 0, (x, y), spec.b, spec.pi)
    else:
        for y in range(spec.alphabet_size):
            out[y] = mixture_marginal(spec, 0, (x, y), state.pair_prob, state.change_prob)
    return out
