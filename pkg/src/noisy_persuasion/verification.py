"""Randomized property suites behind the ``verify`` command.

Every suite draws its models from one seeded generator, so a report is a
pure function of ``(state space, seed, trials)``.

The stability and convergence suites use noiseless classifiers: their
guarantees rely on every Bayes-plausible split being implementable, which
fails for noisy confusions (see :mod:`noisy_persuasion.performative`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analysis import brute_force_value, lipschitz_probe
from .errors import WelfareViolation
from .generators import (
    random_column_stochastic,
    random_confusion,
    random_improving_model,
    random_instance,
)
from .performative import run_performative
from .signaling import IC_TOL, WELFARE_TOL, solve_optimal_scheme, user_welfare_check
from .state_model import ConfusionModel, Instance, PerformativeConfig, StateSpace

BAYES_TOL = 1e-9
ORACLE_STEP = 0.05
ORACLE_MAX_STATES = 4
GEOMETRIC_TOL = 1e-6
GEOMETRIC_FLOOR = 1e-5
ALPHA_TOL = 1e-8
CONTINUITY_SLACK = 1e-9
CONTINUITY_STEPS = (0.04, 0.02, 0.01)
LAMBDAS = (0.25, 0.5, 0.9)


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    trials: int
    failures: int
    detail: str


def _models(rng: np.random.Generator, space: StateSpace, trials: int, noisy: bool = True):
    for _ in range(trials):
        inst = random_instance(rng, space)
        conf = random_confusion(rng, space) if noisy else ConfusionModel.identity(space)
        yield inst, conf


def bayes_plausibility(rng, space: StateSpace, trials: int) -> PropertyResult:
    worst = 0.0
    failures = 0
    for inst, conf in _models(rng, space, trials):
        sol = solve_optimal_scheme(inst, conf)
        mix = sum(b.probability * b.true_posterior.probs for b in sol.branches.values())
        err = float(np.abs(mix - inst.prior).max())
        worst = max(worst, err)
        failures += int(err > BAYES_TOL)
    return PropertyResult("bayes_plausibility", failures == 0, trials, failures, f"max deviation {worst:.3g}")


def persuasiveness(rng, space: StateSpace, trials: int) -> PropertyResult:
    worst = np.inf
    failures = 0
    for inst, conf in _models(rng, space, trials):
        sol = solve_optimal_scheme(inst, conf)
        slack = min(b.ic_slack for b in sol.branches.values())
        worst = min(worst, slack)
        failures += int(slack < -IC_TOL or not sol.persuasive)
    return PropertyResult("persuasiveness", failures == 0, trials, failures, f"min IC slack {worst:.3g}")


def welfare(rng, space: StateSpace, trials: int) -> PropertyResult:
    worst = np.inf
    failures = 0
    for inst, conf in _models(rng, space, trials):
        sol = solve_optimal_scheme(inst, conf)
        worst = min(worst, sol.user_utility - sol.baseline_user_utility)
        try:
            user_welfare_check(sol)
        except WelfareViolation:
            failures += 1
    return PropertyResult("welfare", failures == 0, trials, failures, f"min user gain {worst:.3g} (tol {WELFARE_TOL:g})")


def oracle_sandwich(rng, space: StateSpace, trials: int) -> PropertyResult:
    if space.theta_count > ORACLE_MAX_STATES:
        space = StateSpace(2, 2)
    failures = 0
    worst_low = np.inf
    worst_ratio = 0.0
    for inst, conf in _models(rng, space, trials):
        lp = solve_optimal_scheme(inst, conf).platform_utility
        oracle, _ = brute_force_value(inst, conf, ORACLE_STEP)
        gap = lp - oracle
        cap = ORACLE_STEP * inst.utility_range * inst.theta_count
        worst_low = min(worst_low, gap)
        worst_ratio = max(worst_ratio, gap / cap if cap > 0 else 0.0)
        failures += int(not -1e-9 <= gap <= cap)
    return PropertyResult(
        "oracle_sandwich", failures == 0, trials, failures,
        f"{space.theta_count} states, grid {ORACLE_STEP}: min gap {worst_low:.3g}, max gap/cap {worst_ratio:.3g}",
    )


def stability_bound(rng, space: StateSpace, trials: int) -> PropertyResult:
    n = space.theta_count
    failures = 0
    latest = 0
    for inst, conf in _models(rng, space, trials, noisy=False):
        trace = run_performative(inst, conf, PerformativeConfig(lam=0.0, max_rounds=2 * n + 2))
        stable = trace.stable_at
        if stable is None or stable > 2 * (n - 1):
            failures += 1
            continue
        latest = max(latest, stable)
        sol = trace.rounds[stable].solution
        p = sol.share_probability
        if not (sol.uninformative or min(p, 1.0 - p) <= 1e-9):
            failures += 1
    return PropertyResult(
        "stability_bound", failures == 0, trials, failures,
        f"identity confusion, latest stable round {latest} (bound {2 * (n - 1)})",
    )


def geometric_rate(rng, space: StateSpace, trials: int) -> PropertyResult:
    failures = 0
    worst = 0.0
    for i in range(trials):
        lam = LAMBDAS[i % len(LAMBDAS)]
        inst, conf = random_improving_model_in(rng, space)
        trace = run_performative(inst, conf, PerformativeConfig(lam=lam, max_rounds=60))
        d = trace.distances
        bad = not trace.alpha_recursion_ok
        for t in range(len(d) - 1):
            if d[t] > GEOMETRIC_FLOOR:
                err = abs(d[t + 1] / d[t] - lam)
                worst = max(worst, err)
                bad |= err > GEOMETRIC_TOL
        failures += int(bad)
    return PropertyResult(
        "geometric_rate", failures == 0, trials, failures,
        f"identity confusion, max |ratio - lambda| {worst:.3g}",
    )


def random_improving_model_in(rng, space: StateSpace) -> tuple[Instance, ConfusionModel]:
    """Strictly improving instance on ``space`` with a noiseless classifier."""
    for _ in range(1000):
        inst = random_instance(rng, space)
        conf = ConfusionModel.identity(space)
        sol = solve_optimal_scheme(inst, conf)
        if sol.platform_utility > sol.baseline_platform_utility + 1e-6:
            return inst, conf
    return random_improving_model(rng, space.theta_count, noisy=False)


def continuity_probe(
    rng, space: StateSpace, trials: int, instance: Instance | None = None, confusion: ConfusionModel | None = None
) -> PropertyResult:
    """Perturb the ground-truth classifier toward a random one in halving steps."""
    failures = 0
    worst_ratio = 0.0
    for _ in range(trials):
        inst = instance if instance is not None else random_instance(rng, space)
        base = confusion if confusion is not None else ConfusionModel.identity(space)
        target = random_column_stochastic(rng, space.v_count)
        deltas = []
        bad = False
        for step in CONTINUITY_STEPS:
            if base.q_m is not None and base.q_v is not None:
                moved = ConfusionModel.from_factors(base.q_m, (1.0 - step) * base.q_v + step * target)
            else:
                pull = np.kron(np.eye(space.m_count), target)
                moved = ConfusionModel.from_joint((1.0 - step) * base.q_theta + step * pull)
            report = lipschitz_probe(inst, base, moved)
            deltas.append(report.delta_u)
            worst_ratio = max(worst_ratio, report.ratio / report.bound_estimate if report.bound_estimate else 0.0)
            bad |= report.ratio > report.bound_estimate
        bad |= any(b > a + CONTINUITY_SLACK for a, b in zip(deltas, deltas[1:]))
        failures += int(bad)
    return PropertyResult(
        "continuity_probe", failures == 0, trials, failures, f"max ratio/bound {worst_ratio:.3g}"
    )


Suite = Callable[..., PropertyResult]

SUITES: tuple[tuple[str, Suite], ...] = (
    ("bayes_plausibility", bayes_plausibility),
    ("persuasiveness", persuasiveness),
    ("welfare", welfare),
    ("oracle_sandwich", oracle_sandwich),
    ("stability_bound", stability_bound),
    ("geometric_rate", geometric_rate),
    ("continuity_probe", continuity_probe),
)


def run_suites(
    instance: Instance, confusion: ConfusionModel, seed: int, trials: int
) -> list[PropertyResult]:
    """All suites on the scenario's state space; each suite gets its own stream.

    The continuity suite perturbs the scenario's own classifier, the
    others sample fresh models of the same dimensions.
    """
    space = instance.space
    streams = np.random.SeedSequence(seed).spawn(len(SUITES))
    results = []
    for (name, suite), stream in zip(SUITES, streams):
        rng = np.random.default_rng(stream)
        if name == "continuity_probe":
            results.append(suite(rng, space, max(1, trials // 10), instance, confusion))
        elif name in ("oracle_sandwich", "geometric_rate"):
            results.append(suite(rng, space, max(1, trials // 2)))
        else:
            results.append(suite(rng, space, trials))
    return results
