"""Identity battery tying the recursive filter to the enumeration oracle.

Each check sweeps every path up to a horizon (or a seeded random sample
where noted), measures the worst absolute deviation of one exact identity
and compares it against a fixed tolerance.  The battery is deterministic
given (spec, horizon, seed) and is the backbone of both the `crosscheck`
CLI subcommand and the acceptance suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import oracle, payoff, posterior, stopping
from .errors import SupportError
from .likelihood import mixture_marginal, path_probability
from .model import ModelSpec, change_time_pmf
from .simulate import TrajectorySampler, mix_seed


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_err: float
    tol: float
    detail: str = ""


def _result(name: str, max_err: float, tol: float, detail: str = "") -> CheckResult:
    return CheckResult(name=name, passed=max_err <= tol, max_err=max_err, tol=tol, detail=detail)


def _paths(spec: ModelSpec, n: int):
    for tail in product(range(spec.alphabet_size), repeat=n):
        yield (spec.x0,) + tail


def _filter_states(spec: ModelSpec, horizon: int):
    """All (path, state) pairs up to the horizon, skipping zero-mass paths."""
    frontier = [((spec.x0,), posterior.state_init(spec))]
    for _ in range(horizon):
        nxt = []
        for path, state in frontier:
            pred = posterior.predictive(spec, state)
            for y in range(spec.alphabet_size):
                if pred[y] > 0.0:
                    nxt.append((path + (y,), posterior.state_step(spec, state, y)))
        frontier = nxt
        yield from frontier


def check_path_unity(spec: ModelSpec, horizon: int) -> CheckResult:
    """Path probabilities sum to one at every depth."""
    worst = 0.0
    for n in range(1, horizon + 1):
        total = math.fsum(path_probability(spec, path) for path in _paths(spec, n))
        worst = max(worst, abs(total - 1.0))
    return _result("path_unity", worst, 1e-12)


def check_joint_consistency(spec: ModelSpec, table: oracle.JointTable) -> CheckResult:
    """Table mass, marginalisation across depths and the change-time marginal."""
    worst = 0.0
    for level in table.levels:
        total = math.fsum(oracle.path_prob(table, path) for path in level)
        worst = max(worst, abs(total - 1.0))
    for n in range(table.horizon):
        for path, joint in table.levels[n].items():
            merged = sum(
                table.levels[n + 1][path + (y,)] for y in range(spec.alphabet_size)
            )
            worst = max(worst, float(np.max(np.abs(merged - joint))))
    deep = table.levels[table.horizon]
    for t in range(1, table.max_theta + 1):
        mass = math.fsum(float(joint[t - 1].sum()) for joint in deep.values())
        worst = max(worst, abs(mass - change_time_pmf(spec, t)))
    for path in deep:
        worst = max(
            worst, abs(oracle.path_prob(table, path) - path_probability(spec, path))
        )
    return _result("joint_consistency", worst, 1e-12)


def check_filter_vs_oracle(spec: ModelSpec, table: oracle.JointTable) -> CheckResult:
    """Recursive posteriors match definition-level posteriors on every path."""
    worst = 0.0
    for path, state in _filter_states(spec, table.horizon):
        change, pair = oracle.exact_posterior(table, path)
        live = state.pair_prob > 1e-15
        worst = max(worst, float(np.max(np.abs(pair - state.pair_prob))))
        if np.any(live):
            worst = max(worst, float(np.max(np.abs((change - state.change_prob))[live])))
    return _result("filter_vs_oracle", worst, 1e-10)


def check_survival_projection(
    spec: ModelSpec, table: oracle.JointTable, k_max: int = 4
) -> CheckResult:
    """P(theta <= n + k | path, pair) = 1 - p^k (1 - change_prob)."""
    worst = 0.0
    for path, state in _filter_states(spec, table.horizon):
        n = len(path) - 1
        for k in range(1, k_max + 1):
            if n + k > table.max_theta:
                break
            expected = 1.0 - spec.p**k * (1.0 - state.change_prob)
            got = oracle.change_cdf_given_pair(table, path, n + k)
            live = state.pair_prob > 1e-15
            if np.any(live):
                worst = max(worst, float(np.max(np.abs(got - expected)[live])))
    return _result("survival_projection", worst, 1e-10)


def check_lagged_change(
    spec: ModelSpec, table: oracle.JointTable, k_max: int = 4
) -> CheckResult:
    """Posterior of an old change from the current posterior and ratios."""
    worst = 0.0
    for path, state in _filter_states(spec, table.horizon):
        n = len(path) - 1
        live = state.pair_prob > 1e-15
        for k in range(0, k_max + 1):
            if n == k + 1:
                got = oracle.change_cdf_given_pair(table, path, 0)
                worst = max(worst, float(np.max(np.abs(got))))
            elif n >= k + 2:
                got = oracle.change_cdf_given_pair(table, path, n - k - 1)
                for i, j in spec.pairs():
                    if not live[i, j]:
                        continue
                    expected = posterior.change_lagged(
                        spec, i, j, k, path, float(state.change_prob[i, j])
                    )
                    worst = max(worst, abs(float(got[i, j]) - expected))
    return _result("lagged_change", worst, 1e-10)


def check_payoff_criterion(spec: ModelSpec, horizon: int) -> CheckResult:
    """Fixed-stop success probability agrees between prior and payoff routes."""
    worst = 0.0
    for n in range(spec.d + 1, horizon + 1):
        chk = payoff.criterion_probability(spec, n)
        worst = max(worst, abs(chk.prior_value - chk.payoff_value))
    return _result("payoff_criterion", worst, 1e-10)


def check_multistep_composition(spec: ModelSpec, horizon: int) -> CheckResult:
    """Multi-step posterior updates equal composed one-step updates."""
    worst = 0.0
    for path, state in _filter_states(spec, horizon):
        n = len(path) - 1
        for l in range(0, min(n - 1, spec.d + 1)):
            window = path[n - l - 1 :]
            anchor_state = _state_at(spec, path[: n - l])
            for i, j in spec.pairs():
                multi = posterior.change_multistep(
                    spec, i, j, l, window, float(anchor_state.change_prob[i, j])
                )
                worst = max(worst, abs(multi - float(state.change_prob[i, j])))
        if n >= 1:
            for i, j in spec.pairs():
                from_origin = posterior.change_from_origin(spec, i, j, path)
                worst = max(worst, abs(from_origin - float(state.change_prob[i, j])))
    return _result("multistep_composition", worst, 1e-12)


def _state_at(spec: ModelSpec, path):
    state = posterior.state_init(spec)
    for sym in path[1:]:
        state = posterior.state_step(spec, state, sym)
    return state


def check_backshift_inversion(spec: ModelSpec, seed: int = 20240, trials: int = 200) -> CheckResult:
    """Forward (d+1)-step update then back-shift returns the anchor."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    worst = 0.0
    for _ in range(trials):
        window = tuple(rng.integers(0, spec.alphabet_size, size=spec.d + 2).tolist())
        anchor = float(rng.uniform(0.0, 1.0))
        for i, j in spec.pairs():
            try:
                forward = posterior.change_multistep(spec, i, j, spec.d, window, anchor)
                back = posterior.change_backshift(spec, i, j, window, forward)
            except SupportError:
                continue
            worst = max(worst, abs(back - anchor))
    return _result("backshift_inversion", worst, 1e-9)


def check_continuation_normalization(
    spec: ModelSpec,
    seed: int = 31337,
    trajectories: int = 50,
    horizon: int | None = None,
    k_values: tuple[int, ...] = (0, 1, 2),
) -> CheckResult:
    """Scaling property of the continuation values along filtered trajectories."""
    if horizon is None:
        horizon = spec.d + 4
    sampler = TrajectorySampler(spec, horizon)
    worst = 0.0
    for t in range(trajectories):
        traj = sampler.sample(mix_seed(seed, t))
        state = posterior.state_init(spec)
        for n in range(1, horizon + 1):
            prev = state
            state = posterior.state_step(spec, state, traj.observations[n])
            if state.n <= spec.d + 1:
                continue
            x_prev, x_next = traj.observations[n - 1], traj.observations[n]
            norm = mixture_marginal(
                spec, 0, (x_prev, x_next), prev.pair_prob, prev.change_prob
            )
            composed = (
                spec.p * spec.pre_kernels[:, x_prev, x_next][:, None] * prev.pair_prob
            )
            for k in k_values:
                lhs = (
                    stopping.continuation_value(
                        spec, k, state.window, state.change_prob, state.pair_prob
                    )
                    * norm
                )
                rhs = stopping.continuation_value(
                    spec, k, state.window, prev.change_prob, composed
                )
                worst = max(worst, abs(lhs - rhs))
    return _result("continuation_normalization", worst, 1e-9)


def check_predictive_chain(spec: ModelSpec, horizon: int) -> CheckResult:
    """Predictive density equals the ratio of consecutive path probabilities."""
    worst = 0.0
    for path, state in _filter_states(spec, horizon - 1):
        pred = posterior.predictive(spec, state)
        base = path_probability(spec, path) if len(path) > 1 else 1.0
        for y in range(spec.alphabet_size):
            ratio = path_probability(spec, path + (y,)) / base
            worst = max(worst, abs(float(pred[y]) - ratio))
    # depth-zero predictive against first-step path probabilities
    root = posterior.state_init(spec)
    pred = posterior.predictive(spec, root)
    for y in range(spec.alphabet_size):
        worst = max(worst, abs(float(pred[y]) - path_probability(spec, (spec.x0, y))))
    return _result("predictive_chain", worst, 1e-12)


def run_crosscheck(spec: ModelSpec, horizon: int, seed: int = 7) -> list[CheckResult]:
    """Run the full battery; deterministic given (spec, horizon, seed)."""
    table = oracle.build_joint(spec, horizon, max_theta=horizon + spec.d + 4)
    results = [
        check_path_unity(spec, horizon),
        check_joint_consistency(spec, table),
        check_filter_vs_oracle(spec, table),
        check_survival_projection(spec, table),
        check_lagged_change(spec, table),
        check_payoff_criterion(spec, min(horizon, 6)),
        check_multistep_composition(spec, min(horizon, 5)),
        check_backshift_inversion(spec, seed=mix_seed(seed, 1)),
        check_continuation_normalization(spec, seed=mix_seed(seed, 2)),
        check_predictive_chain(spec, horizon),
    ]
    return results
