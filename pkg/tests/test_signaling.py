import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisy_persuasion.bayes_core import SignalingScheme
from noisy_persuasion.errors import WelfareViolation
from noisy_persuasion.generators import random_confusion, random_instance
from noisy_persuasion.signaling import (
    IC_TOL,
    PersuasionSolution,
    best_response,
    evaluate_scheme,
    no_signal_baseline,
    solve_optimal_scheme,
    user_welfare_check,
)
from noisy_persuasion.state_model import NOT_SHARE, SHARE, Belief, Instance, StateSpace

from conftest import EXAMPLE_PRIOR, EXAMPLE_SCHEME

SEEDS = st.integers(0, 2**32 - 1)


def test_best_response_at_prior(example):
    assert best_response(example, Belief.true(EXAMPLE_PRIOR)) == SHARE


def test_best_response_tie_goes_to_platform(example):
    # user is indifferent at P(v=1) = 1/4; the platform prefers not sharing
    assert best_response(example, Belief.true([0, 0, 0.75, 0.25])) == NOT_SHARE


def test_best_response_point_mass(example):
    assert best_response(example, Belief.true([0, 1, 0, 0])) == SHARE


def test_best_response_needs_true_belief(example):
    with pytest.raises(ValueError):
        best_response(example, Belief.predicted(EXAMPLE_PRIOR))


def test_baseline(example):
    action, platform, user = no_signal_baseline(example)
    assert action == SHARE
    assert platform == pytest.approx(0.45, abs=1e-12)
    assert user == pytest.approx(0.0, abs=1e-12)


def test_baseline_zero_utility(example):
    zero = example.with_platform_utility(np.zeros((4, 2)))
    assert no_signal_baseline(zero)[1] == 0.0


def test_baseline_point_mass(example):
    action, platform, user = no_signal_baseline(example.with_prior([0, 0, 1, 0]))
    assert (action, platform, user) == (NOT_SHARE, 0.0, 0.0)


def test_optimal_scheme(example, identity):
    sol = solve_optimal_scheme(example, identity)
    assert isinstance(sol, PersuasionSolution)
    assert sol.platform_utility == pytest.approx(0.75, abs=1e-8)
    assert sol.share_probability == pytest.approx(0.8, abs=1e-8)
    np.testing.assert_allclose(sol.scheme.share_prob, EXAMPLE_SCHEME, atol=1e-9)
    share = sol.branches[SHARE]
    assert share.action == SHARE
    platform_at_share = float(share.true_posterior.probs @ example.platform_utility[:, SHARE])
    assert platform_at_share == pytest.approx(0.9375, abs=1e-8)
    assert sol.branches[NOT_SHARE].action == NOT_SHARE
    assert sol.persuasive
    assert not sol.uninformative
    assert sol.baseline_platform_utility == pytest.approx(0.45)


def test_aligned_utilities_reveal_everything(identity, space):
    user = np.array([[0.0, -1.0], [-2.0, 1.0]])
    prior = np.array([0.1, 0.2, 0.3, 0.4])
    inst = Instance(space, prior, user[space.v_of_theta], user)
    sol = solve_optimal_scheme(inst, identity)
    assert sol.platform_utility == pytest.approx(float(prior @ user[space.v_of_theta].max(axis=1)), abs=1e-9)


def test_noisy_value_between_baseline_and_noiseless(example, symmetric_noise):
    sol = solve_optimal_scheme(example, symmetric_noise)
    assert 0.45 <= sol.platform_utility <= 0.75
    assert sol.platform_utility == pytest.approx(0.4875, abs=1e-9)
    assert sol.persuasive


def test_tie_break_prefers_sharing(example, identity):
    shifted = example.with_prior([7 / 16, 7 / 16, 0.0, 1 / 8])
    sol = solve_optimal_scheme(shifted, identity)
    assert sol.uninformative
    assert sol.share_probability == pytest.approx(1.0)
    plain = solve_optimal_scheme(shifted, identity, prefer_sharing=False)
    assert plain.platform_utility == pytest.approx(sol.platform_utility, abs=1e-12)


def test_evaluate_matches_lp(example, identity):
    sol = evaluate_scheme(example, identity, SignalingScheme(EXAMPLE_SCHEME))
    assert sol.platform_utility == pytest.approx(0.75, abs=1e-12)
    assert sol.signal_probs == pytest.approx((0.2, 0.8))


def test_non_persuasive_scheme_flagged(example, identity):
    # recommending share everywhere except (0,1) sends share at P(v=1) small
    sol = evaluate_scheme(example, identity, SignalingScheme(np.array([1.0, 0.0, 1.0, 0.0])))
    assert not sol.persuasive


def test_user_welfare(example, identity):
    assert user_welfare_check(solve_optimal_scheme(example, identity)) == pytest.approx(0.0, abs=1e-9)
    uninformative = evaluate_scheme(example, identity, SignalingScheme.constant(4, 1.0))
    assert user_welfare_check(uninformative) == 0.0
    full = evaluate_scheme(example, identity, SignalingScheme(np.array([0.0, 1.0, 0.0, 1.0])))
    assert user_welfare_check(full) >= 0.0


def test_welfare_violation_raises(example, identity):
    sol = solve_optimal_scheme(example, identity)
    worse = dataclasses.replace(sol, user_utility=sol.baseline_user_utility - 1e-6)
    with pytest.raises(WelfareViolation):
        user_welfare_check(worse)


@given(SEEDS)
def test_random_solutions_persuasive_and_welfare_safe(seed):
    rng = np.random.default_rng(seed)
    space = StateSpace(2, 2)
    inst, conf = random_instance(rng, space), random_confusion(rng, space)
    sol = solve_optimal_scheme(inst, conf)
    assert sol.persuasive
    assert min(b.ic_slack for b in sol.branches.values()) >= -IC_TOL
    assert sol.platform_utility >= sol.baseline_platform_utility - 1e-9
    user_welfare_check(sol)
