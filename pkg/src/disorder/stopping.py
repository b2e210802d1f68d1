"""Value iteration and the optimal stopping rule.

The continuation values s_k are defined by one backward-induction sweep per
level: s_0 integrates the stop payoff one step ahead, and for k >= 1

    s_k(w, gamma, delta) = sum_y max{ stop(w', y), s_{k-1}(w' + (y,), gamma, c(y) o delta) }

where w' drops the oldest symbol of w, stop(w', y) is the one-step-ahead
stop payoff weighted by the pre-change transition density, and the delta
argument is composed entrywise with c(y)[i, j] = p[i, j] * f0_i(x_last, y).
The gamma grid passes through unchanged, and s_k is positively homogeneous
in delta, which lets the evaluator memoise on direction rather than scale.

s_k increases pointwise in k; its limit s* defines the stopping region
{ h >= s* }.  The rule runner never stops before d + 1, applies a boundary
comparison at d + 1 (two readings supported, see rule_runner) and afterwards
stops on first entry into the region, with s* replaced by s_K at the first
k with |s_k - s_{k-1}| below tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError
from .likelihood import Window, likelihood_ratio_chain
from .model import ModelSpec
from .payoff import detection_coeff_matrix, stop_payoff, stop_payoff_boundary
from .posterior import PosteriorState, predictive, state_init, state_step

# Hard cap on recursion nodes per evaluator, a guard against runaway configs.
NODE_BUDGET = 5_000_000

_DELTA_DECIMALS = 12


@dataclass(frozen=True)
class ValueIterConfig:
    """Iteration cap, pointwise Cauchy tolerance and probe-state count."""

    k_max: int = 10
    tol: float = 1e-8
    probe_points: int = 32

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class StopDecision:
    """Outcome of comparing the stop payoff against the continuation value."""

    stop: bool
    stop_value: float
    continue_value: float
    k_used: int
    converged: bool = True


@dataclass(frozen=True)
class ValueIterResult:
    value: float
    k_used: int
    converged: bool
    history: tuple[float, ...]


class _Evaluator:
    """Memoised evaluator of s_k for one spec and one gamma grid.

    The memo key is (k, window, direction of delta); scale factors multiply
    back out by homogeneity.  Confine one evaluator per worker, the memo is
    not synchronised.
    """

    def __init__(self, spec: ModelSpec, gamma: np.ndarray, budget: int = NODE_BUDGET):
        self.spec = spec
        self.weight = spec.p * (1.0 - np.asarray(gamma, dtype=np.float64))
        self.memo: dict = {}
        self.nodes = 0
        self.budget = budget

    def _base_coeff(self, tail: Window) -> np.ndarray:
        # One-step-ahead payoff coefficients integrated over the next symbol:
        # 1 - p^d + q (1 + sum_{t=1..d} L_t/(p^t L_0)) / p over the d+1 tail.
        spec = self.spec
        q = 1.0 - spec.p
        chain = likelihood_ratio_chain(spec, tail, spec.d)
        return 1.0 - spec.p**spec.d + q * (1.0 + chain) / spec.p

    def value(self, k: int, window: Window, delta: np.ndarray) -> float:
        spec = self.spec
        if len(window) != spec.d + 2:
            raise ValueError(f"window must have length {spec.d + 2}")
        delta = np.asarray(delta, dtype=np.float64)
        scale = float(delta.sum())
        if scale <= 0.0:
            return 0.0
        direction = np.round(delta / scale, _DELTA_DECIMALS) + 0.0
        key = (k, window, direction.tobytes())
        hit = self.memo.get(key)
        if hit is not None:
            return scale * hit
        self.nodes += 1
        if self.nodes > self.budget:
            raise BudgetError(f"value iteration exceeded {self.budget} nodes")
        dn = delta / scale
        if k == 0:
            val = float(np.sum(self._base_coeff(window[1:]) * self.weight * dn))
        else:
            tail = window[1:]
            x_last = window[-1]
            total = 0.0
            for y in range(spec.alphabet_size):
                w2 = tail + (y,)
                f0 = spec.pre_kernels[:, x_last, y][:, None]
                stop = float(np.sum(detection_coeff_matrix(spec, w2) * f0 * self.weight * dn))
                cont = self.value(k - 1, w2, spec.p * f0 * dn)
                total += max(stop, cont)
            val = total
        self.memo[key] = val
        return scale * val


def continuation_value(
    spec: ModelSpec,
    k: int,
    window: Window,
    gamma: np.ndarray,
    delta: np.ndarray,
    budget: int = NODE_BUDGET,
) -> float:
    """Evaluate s_k at one state; k = 0 is the closed one-step form."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return _Evaluator(spec, gamma, budget).value(k, tuple(window), delta)


def value_iterate(
    spec: ModelSpec,
    window: Window,
    gamma: np.ndarray,
    delta: np.ndarray,
    cfg: ValueIterConfig,
) -> ValueIterResult:
    """Iterate s_k at one state until the pointwise Cauchy gap drops below tol.

    Returns s_K at the first K <= k_max with |s_K - s_{K-1}| <= tol, or s_kmax
    with converged=False when the gap never closes.
    """
    ev = _Evaluator(spec, gamma)
    window = tuple(window)
    history = [ev.value(0, window, delta)]
    for k in range(1, cfg.k_max + 1):
        history.append(ev.value(k, window, delta))
        if abs(history[-1] - history[-2]) <= cfg.tol:
            return ValueIterResult(history[-1], k, True, tuple(history))
    return ValueIterResult(history[-1], cfg.k_max, False, tuple(history))


def stop_decision(spec: ModelSpec, state: PosteriorState, cfg: ValueIterConfig) -> StopDecision:
    """Membership test of the state in the stopping region, ties stop."""
    if state.n < spec.d + 2:
        raise ValueError("region test applies from time d + 2 on")
    h = stop_payoff(spec, state.window, state.change_prob, state.pair_prob)
    res = value_iterate(spec, state.window, state.change_prob, state.pair_prob, cfg)
    return StopDecision(
        stop=h >= res.value,
        stop_value=h,
        continue_value=res.value,
        k_used=res.k_used,
        converged=res.converged,
    )


def boundary_decision(
    spec: ModelSpec, state: PosteriorState, cfg: ValueIterConfig
) -> StopDecision:
    """Stop-or-continue comparison at the earliest admissible time d + 1.

    Compares the boundary payoff against the expected value of the better of
    stopping or continuing one step ahead, which is measurable at d + 1.
    """
    if state.n != spec.d + 1:
        raise ValueError("boundary comparison applies exactly at time d + 1")
    h = stop_payoff_boundary(spec, state.change_prob, state.pair_prob)
    pred = predictive(spec, state)
    total = 0.0
    k_used = 0
    converged = True
    for y in range(spec.alphabet_size):
        w = float(pred[y])
        if w == 0.0:
            continue
        nxt = state_step(spec, state, y)
        h_next = stop_payoff(spec, nxt.window, nxt.change_prob, nxt.pair_prob)
        res = value_iterate(spec, nxt.window, nxt.change_prob, nxt.pair_prob, cfg)
        k_used = max(k_used, res.k_used)
        converged = converged and res.converged
        total += w * max(h_next, res.value)
    return StopDecision(
        stop=h >= total,
        stop_value=h,
        continue_value=total,
        k_used=k_used,
        converged=converged,
    )


@dataclass(frozen=True)
class DecisionRecord:
    n: int
    stop_value: float
    continue_value: float
    stopped: bool
    k_used: int
    converged: bool


@dataclass(frozen=True)
class RuleRun:
    """Trace of one rule application; stop_time is None when censored."""

    stop_time: int | None
    censored: bool
    trace: tuple[DecisionRecord, ...]
    final_state: PosteriorState


def rule_runner(
    spec: ModelSpec,
    observations: Window,
    cfg: ValueIterConfig,
    variant: str = "expected",
) -> RuleRun:
    """Apply the optimal stopping rule to an observation stream.

    Never stops before d + 1.  At d + 1 the boundary dichotomy runs in one of
    two readings: "expected" (default) compares the boundary payoff with the
    expected best of stop/continue one step ahead; "literal" waits for the
    next symbol, compares against the continuation value at the realised next
    state, and on a stop reports d + 1 retroactively.  From d + 2 on, the
    runner stops at first entry of the state into the stopping region.
    Exhausting the stream yields a censored result carrying the last state.
    """
    if variant not in ("expected", "literal"):
        raise ValueError("variant must be 'expected' or 'literal'")
    observations = tuple(observations)
    if not observations or observations[0] != spec.x0:
        raise ValueError(f"stream must start at x0={spec.x0}")
    state = state_init(spec)
    trace: list[DecisionRecord] = []
    horizon = len(observations) - 1
    n = 0
    while n < horizon:
        n += 1
        state = state_step(spec, state, observations[n])
        if state.n < spec.d + 1:
            continue
        if state.n == spec.d + 1:
            if variant == "expected":
                dec = boundary_decision(spec, state, cfg)
                trace.append(
                    DecisionRecord(
                        state.n, dec.stop_value, dec.continue_value,
                        dec.stop, dec.k_used, dec.converged,
                    )
                )
                if dec.stop:
                    return RuleRun(state.n, False, tuple(trace), state)
            else:
                if n + 1 > horizon:
                    break
                h_bound = stop_payoff_boundary(spec, state.change_prob, state.pair_prob)
                nxt = state_step(spec, state, observations[n + 1])
                res = value_iterate(spec, nxt.window, nxt.change_prob, nxt.pair_prob, cfg)
                stopped = h_bound >= res.value
                trace.append(
                    DecisionRecord(
                        state.n, h_bound, res.value, stopped, res.k_used, res.converged
                    )
                )
                if stopped:
                    return RuleRun(state.n, False, tuple(trace), state)
            continue
        dec = stop_decision(spec, state, cfg)
        trace.append(
            DecisionRecord(
                state.n, dec.stop_value, dec.continue_value,
                dec.stop, dec.k_used, dec.converged,
            )
        )
        if dec.stop:
            return RuleRun(state.n, False, tuple(trace), state)
    return RuleRun(None, True, tuple(trace), state)


class OptimalStoppingRule:
    """Prefix-cached adapter of the rule for simulation and exact evaluation.

    Decisions depend on the observed prefix only, so repeated evaluation over
    many trajectories reuses one decision per distinct prefix.
    """

    def __init__(self, spec: ModelSpec, cfg: ValueIterConfig, variant: str = "expected"):
        if variant not in ("expected", "literal"):
            raise ValueError("variant must be 'expected' or 'literal'")
        self.spec = spec
        self.cfg = cfg
        self.variant = variant
        self._states: dict[Window, PosteriorState] = {}
        self._decisions: dict[Window, bool] = {}

    def _state_at(self, prefix: Window) -> PosteriorState:
        hit = self._states.get(prefix)
        if hit is not None:
            return hit
        if len(prefix) == 1:
            state = state_init(self.spec)
        else:
            state = state_step(self.spec, self._state_at(prefix[:-1]), prefix[-1])
        self._states[prefix] = state
        return state

    def _decide(self, prefix: Window) -> bool:
        hit = self._decisions.get(prefix)
        if hit is not None:
            return hit
        spec, cfg = self.spec, self.cfg
        state = self._state_at(prefix)
        n = state.n
        if n < spec.d + 1:
            out = False
        elif n == spec.d + 1:
            # In the literal reading this prefix cannot be decided yet; the
            # caller resolves it one symbol later via _decide_literal_boundary.
            if self.variant == "literal":
                out = False
            else:
                out = boundary_decision(spec, state, cfg).stop
        else:
            out = stop_decision(spec, state, cfg).stop
        self._decisions[prefix] = out
        return out

    def _decide_literal_boundary(self, prefix: Window) -> bool:
        # prefix has length d + 3; compares the boundary payoff at d + 1
        # against the continuation value at the realised d + 2 state.
        key = ("literal",) + prefix
        hit = self._decisions.get(key)
        if hit is not None:
            return hit
        spec, cfg = self.spec, self.cfg
        prev = self._state_at(prefix[:-1])
        h_bound = stop_payoff_boundary(spec, prev.change_prob, prev.pair_prob)
        nxt = self._state_at(prefix)
        res = value_iterate(spec, nxt.window, nxt.change_prob, nxt.pair_prob, cfg)
        out = h_bound >= res.value
        self._decisions[key] = out
        return out

    def stop_time(self, observations: Window) -> int | None:
        """First stop along the path, or None when the rule never fires."""
        observations = tuple(observations)
        if not observations or observations[0] != self.spec.x0:
            raise ValueError(f"stream must start at x0={self.spec.x0}")
        d = self.spec.d
        horizon = len(observations) - 1
        if self.variant == "literal":
            if d + 2 <= horizon and self._decide_literal_boundary(observations[: d + 3]):
                return d + 1
            for n in range(d + 2, horizon + 1):
                if self._decide(observations[: n + 1]):
                    return n
            return None
        for n in range(d + 1, horizon + 1):
            if self._decide(observations[: n + 1]):
                return n
        return None

    def __call__(self, observations: Window) -> int | None:
        return self.stop_time(observations)
