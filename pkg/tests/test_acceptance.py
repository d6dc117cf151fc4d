"""Acceptance criteria, each checked at its stated tolerance and time budget.

Every test prints one ``PASS``/``FAIL`` line and adds it to the session
summary.  The stability, convergence and posterior-location criteria are
checked with noiseless classifiers, the setting in which those guarantees
hold; their noisy counterparts are recorded as expected failures.
"""

from __future__ import annotations

import time
import warnings

import numpy as np
import pytest

from noisy_persuasion.analysis import (
    brute_force_value,
    check_monotone_condition,
    lipschitz_probe,
    posterior_locations,
)
from noisy_persuasion.errors import IllConditionedWarning
from noisy_persuasion.generators import (
    random_column_stochastic,
    random_improving_model,
    random_model,
    random_monotone_hypothesis_model,
    random_stochastic,
)
from noisy_persuasion.performative import check_monotone_utility, run_performative
from noisy_persuasion.signaling import IC_TOL, no_signal_baseline, solve_optimal_scheme
from noisy_persuasion.state_model import SHARE, ConfusionModel, Instance, PerformativeConfig, StateSpace

from conftest import ACCEPTANCE_LINES, EXAMPLE_PLATFORM, EXAMPLE_PRIOR, EXAMPLE_USER

pytestmark = pytest.mark.acceptance

GEOMETRIC_FLOOR = 1e-5


def example_instance() -> Instance:
    return Instance(StateSpace(2, 2), EXAMPLE_PRIOR, EXAMPLE_PLATFORM, EXAMPLE_USER)


def report(number: int, name: str, ok: bool, detail: str, elapsed: float, budget: float) -> None:
    within = elapsed < budget
    verdict = "PASS" if ok and within else "FAIL"
    line = f"criterion {number} {name}: {verdict} ({detail}; {elapsed:.2f} s of {budget:g} s)"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line
    assert within, line


def stability_failures(rng: np.random.Generator, noisy: bool, trials: int) -> tuple[int, int]:
    failures = 0
    latest = 0
    for i in range(trials):
        n = (2, 4)[i % 2]
        inst, conf = random_model(rng, n, noisy=noisy)
        trace = run_performative(inst, conf, PerformativeConfig(lam=0.0, max_rounds=2 * n + 2))
        stable = trace.stable_at
        if stable is None or stable > 2 * (n - 1) or not trace.rounds[stable].solution.uninformative:
            failures += 1
            continue
        latest = max(latest, stable)
    return failures, latest


def geometric_failures(rng: np.random.Generator, noisy: bool, per_lambda: int) -> tuple[int, int, float]:
    failures = traces = 0
    worst = 0.0
    for lam in (0.25, 0.5, 0.9):
        for _ in range(per_lambda):
            inst, conf = random_improving_model(rng, 4, noisy=noisy)
            trace = run_performative(inst, conf, PerformativeConfig(lam=lam, max_rounds=60))
            d = trace.distances
            bad = not trace.alpha_recursion_ok
            for t in range(len(d) - 1):
                if d[t] > GEOMETRIC_FLOOR:
                    err = abs(d[t + 1] / d[t] - lam)
                    worst = max(worst, err)
                    bad |= err > 1e-6
            failures += int(bad)
            traces += 1
    return failures, traces, worst


def location_failures(rng: np.random.Generator, noisy: bool, trials: int) -> int:
    failures = 0
    for i in range(trials):
        inst, conf = random_improving_model(rng, (2, 4)[i % 2], noisy=noisy)
        locs = posterior_locations(inst, conf, solve_optimal_scheme(inst, conf))
        failures += int(not all(loc.located(1e-6) for loc in locs))
    return failures


def test_worked_example_golden():
    start = time.perf_counter()
    inst = example_instance()
    sol = solve_optimal_scheme(inst, ConfusionModel.identity(inst.space))
    _, baseline, _ = no_signal_baseline(inst)
    share = sol.branches[SHARE].true_posterior.probs @ inst.platform_utility[:, SHARE]
    elapsed = time.perf_counter() - start
    ok = (
        abs(baseline - 0.45) <= 1e-8
        and abs(sol.platform_utility - 0.75) <= 1e-8
        and abs(sol.share_probability - 0.8) <= 1e-8
        and abs(share - 0.937) <= 5e-4
        and abs(share - 0.9375) <= 1e-8
    )
    detail = f"baseline {baseline:.10g}, optimum {sol.platform_utility:.10g}, P(share) {sol.share_probability:.10g}, share value {share:.10g}"
    report(1, "worked example", ok, detail, elapsed, 1.0)


def test_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(1002)
    low = high = 0
    worst_low, worst_high = np.inf, 0.0
    for _ in range(100):
        inst, conf = random_model(rng, 4, noisy=True)
        lp = solve_optimal_scheme(inst, conf).platform_utility
        oracle, _ = brute_force_value(inst, conf, 0.05)
        cap = 0.05 * inst.utility_range * 4
        low += int(lp < oracle - 1e-9)
        high += int(lp - oracle > cap)
        worst_low = min(worst_low, lp - oracle)
        worst_high = max(worst_high, (lp - oracle) / cap)
    elapsed = time.perf_counter() - start
    detail = f"100 noisy instances, min LP - oracle {worst_low:.3g}, max gap/cap {worst_high:.3g}"
    report(2, "oracle equivalence", low == 0 and high == 0, detail, elapsed, 120.0)


def test_persuasiveness_and_welfare():
    start = time.perf_counter()
    rng = np.random.default_rng(1003)
    failures = 0
    min_slack = min_gain = np.inf
    for i in range(200):
        inst, conf = random_model(rng, (2, 4, 6, 8)[i % 4], noisy=True)
        sol = solve_optimal_scheme(inst, conf)
        slack = min(b.ic_slack for b in sol.branches.values())
        gain = sol.user_utility - sol.baseline_user_utility
        min_slack, min_gain = min(min_slack, slack), min(min_gain, gain)
        failures += int(slack < -IC_TOL or gain < -1e-9)
    elapsed = time.perf_counter() - start
    detail = f"200 noisy instances, min IC slack {min_slack:.3g}, min user gain {min_gain:.3g}"
    report(3, "persuasiveness and welfare", failures == 0, detail, elapsed, 30.0)


def test_monotonicity_sufficiency():
    start = time.perf_counter()
    rng = np.random.default_rng(1004)
    value_failures = hull_failures = 0
    worst = np.inf
    for _ in range(100):
        q2 = random_column_stochastic(rng, 4)
        q1 = q2 @ random_stochastic(rng, 4, 4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IllConditionedWarning)
            better, worse = ConfusionModel.from_joint(q2), ConfusionModel.from_joint(q1)
        hull_failures += int(not all(r.is_member for r in check_monotone_condition(worse, better)))
        for _ in range(5):
            inst, _ = random_model(rng, 4)
            diff = solve_optimal_scheme(inst, better).platform_utility - solve_optimal_scheme(inst, worse).platform_utility
            worst = min(worst, diff)
            value_failures += int(diff < -1e-8)
    elapsed = time.perf_counter() - start
    detail = (
        f"100 hull pairs x 5 instances, {value_failures} value decreases, "
        f"min u*(Q2) - u*(Q1) {worst:.3g}, hull failures {hull_failures}"
    )
    report(4, "monotonicity sufficiency", value_failures == 0 and hull_failures == 0, detail, elapsed, 60.0)


def test_memoryless_stability_bound():
    start = time.perf_counter()
    failures, latest = stability_failures(np.random.default_rng(1005), noisy=False, trials=200)
    elapsed = time.perf_counter() - start
    detail = f"200 instances, noiseless classifier, {failures} failures, latest stable round {latest}"
    report(5, "lambda = 0 stability bound", failures == 0, detail, elapsed, 60.0)


def test_geometric_convergence():
    start = time.perf_counter()
    failures, traces, worst = geometric_failures(np.random.default_rng(1006), noisy=False, per_lambda=20)
    elapsed = time.perf_counter() - start
    detail = f"{traces} traces, noiseless classifier, {failures} failures, max |ratio - lambda| {worst:.3g}"
    report(6, "geometric convergence", failures == 0, detail, elapsed, 30.0)


def test_monotone_normalized_utility():
    start = time.perf_counter()
    inst = example_instance()
    trace = run_performative(inst, ConfusionModel.identity(inst.space), PerformativeConfig(lam=0.0))
    normalized = trace.raw_platform_utilities - trace.normalization
    example_ok = check_monotone_utility(trace, inst) and abs(normalized[-1] - 0.9375) <= 1e-8
    rng = np.random.default_rng(1007)
    failures = 0
    worst = np.inf
    for i in range(50):
        model_inst, conf = random_monotone_hypothesis_model(rng, (2, 4)[i % 2], noisy=True)
        model_trace = run_performative(model_inst, conf, PerformativeConfig(lam=0.0, max_rounds=20))
        steps = np.diff(model_trace.raw_platform_utilities)
        worst = min(worst, float(steps.min(initial=0.0)))
        failures += int(not check_monotone_utility(model_trace, model_inst))
    elapsed = time.perf_counter() - start
    detail = f"example ends at {normalized[-1]:.10g}; 50 noisy instances, {failures} failures, min step {worst:.3g}"
    report(7, "monotone normalized utility", example_ok and failures == 0, detail, elapsed, 30.0)


def test_continuity_probe():
    start = time.perf_counter()
    inst = example_instance()
    base = ConfusionModel.identity(inst.space)
    reports = []
    for delta in (0.04, 0.02, 0.01):
        q_v = np.array([[1 - delta, delta], [delta, 1 - delta]])
        reports.append(lipschitz_probe(inst, base, ConfusionModel.from_factors(np.eye(2), q_v)))
    deltas = [r.delta_u for r in reports]
    decreasing = all(b <= a + 1e-9 for a, b in zip(deltas, deltas[1:]))
    bounded = all(r.ratio <= r.bound_estimate for r in reports)
    elapsed = time.perf_counter() - start
    detail = (
        "delta_u " + ", ".join(f"{d:.4g}" for d in deltas)
        + "; ratio/bound " + ", ".join(f"{r.ratio / r.bound_estimate:.3g}" for r in reports)
    )
    report(8, "continuity probe", decreasing and bounded, detail, elapsed, 10.0)


def test_posterior_location():
    start = time.perf_counter()
    failures = location_failures(np.random.default_rng(1009), noisy=False, trials=100)
    elapsed = time.perf_counter() - start
    detail = f"100 strictly improving instances, noiseless classifier, {failures} failures"
    report(9, "posterior location", failures == 0, detail, elapsed, 30.0)


# With a noisy classifier only splits in the image of the scheme box are
# implementable, so the three guarantees above can break.  These record
# that they do; a strict xfail turns an unexpected pass into a failure.


def _noisy_line(number: int, text: str) -> None:
    line = f"criterion {number} noisy classifier (expected to fail): {text}"
    print(line)
    ACCEPTANCE_LINES.append(line)


@pytest.mark.xfail(strict=True, reason="stable point can stay informative under classifier noise")
def test_memoryless_stability_bound_noisy():
    failures, _ = stability_failures(np.random.default_rng(1105), noisy=True, trials=200)
    _noisy_line(5, f"{failures} of 200 instances violate the bound or end informative")
    assert failures == 0


@pytest.mark.xfail(strict=True, reason="contraction rate differs from lambda under classifier noise")
def test_geometric_convergence_noisy():
    failures, traces, worst = geometric_failures(np.random.default_rng(1106), noisy=True, per_lambda=20)
    _noisy_line(6, f"{failures} of {traces} traces off the geometric rate, max |ratio - lambda| {worst:.3g}")
    assert failures == 0


@pytest.mark.xfail(strict=True, reason="optimal posteriors need not touch the boundary or the plane under noise")
def test_posterior_location_noisy():
    failures = location_failures(np.random.default_rng(1109), noisy=True, trials=100)
    _noisy_line(9, f"{failures} of 100 instances have an unlocated posterior")
    assert failures == 0
