"""Full persuasion solutions: baseline, user best response, optimal scheme."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .bayes_core import ZERO_SIGNAL_TOL, SignalingScheme, posterior, signal_likelihood
from .errors import PersuasionError, WelfareViolation
from .lp_engine import LPSolution, LPStatus, build_direct_lp, solve_lp, solve_lp_with_secondary
from .state_model import ACTIONS, NOT_SHARE, SHARE, Belief, ConfusionModel, Instance, Space

TIE_TOL = 1e-9
IC_TOL = 1e-7
WELFARE_TOL = 1e-9


class InfeasibleModel(PersuasionError):
    """The signaling LP has no feasible point (cannot happen for valid data)."""


def expected_user_utility(instance: Instance, belief: Belief) -> NDArray[np.float64]:
    """Expected ``w(a, v)`` under ``belief`` for both actions."""
    return belief.probs @ instance.user_utility_by_theta


def expected_platform_utility(instance: Instance, belief: Belief) -> NDArray[np.float64]:
    return belief.probs @ instance.platform_utility


def _best_response(instance: Instance, belief: Belief) -> tuple[int, bool]:
    if belief.space_tag is not Space.TRUE:
        raise ValueError("best response needs a belief over true states")
    w = expected_user_utility(instance, belief)
    if abs(w[SHARE] - w[NOT_SHARE]) > TIE_TOL:
        return int(np.argmax(w)), False
    u = expected_platform_utility(instance, belief)
    if abs(u[SHARE] - u[NOT_SHARE]) > TIE_TOL:
        return int(np.argmax(u)), False
    return SHARE, True


def best_response(instance: Instance, belief: Belief) -> int:
    """User-optimal action; ties go to the platform, then to share."""
    return _best_response(instance, belief)[0]


def no_signal_baseline(instance: Instance) -> tuple[int, float, float]:
    """Action, platform utility and user utility when nothing is revealed."""
    prior = Belief.true(instance.prior)
    action = best_response(instance, prior)
    return (
        action,
        float(expected_platform_utility(instance, prior)[action]),
        float(expected_user_utility(instance, prior)[action]),
    )


@dataclass(frozen=True, eq=False)
class SignalBranch:
    """What happens after one signal: its probability, posteriors and action."""

    signal: int
    probability: float
    true_posterior: Belief
    predicted_posterior: Belief
    action: int
    ic_slack: float
    double_indifference: bool


@dataclass(frozen=True, eq=False)
class PersuasionSolution:
    scheme: SignalingScheme
    signal_probs: tuple[float, float]
    branches: dict[int, SignalBranch]
    platform_utility: float
    user_utility: float
    baseline_action: int
    baseline_platform_utility: float
    baseline_user_utility: float
    persuasive: bool
    lp_value: float | None = None

    def posteriors(self, signal: int) -> tuple[Belief, Belief] | None:
        """``(true, predicted)`` posterior for a sent signal, else ``None``."""
        branch = self.branches.get(signal)
        return None if branch is None else (branch.true_posterior, branch.predicted_posterior)

    @property
    def uninformative(self) -> bool:
        if len(self.branches) < 2:
            return True
        p0 = self.branches[NOT_SHARE].true_posterior.probs
        p1 = self.branches[SHARE].true_posterior.probs
        return bool(np.max(np.abs(p0 - p1)) <= 1e-9)

    @property
    def share_probability(self) -> float:
        return self.signal_probs[SHARE]


def evaluate_scheme(
    instance: Instance,
    confusion: ConfusionModel,
    scheme: SignalingScheme,
    lp_value: float | None = None,
) -> PersuasionSolution:
    """Reconstruct posteriors and ex-ante utilities of an arbitrary scheme.

    A user who receives a recommendation that is optimal at its posterior
    (within ``IC_TOL``) follows it; otherwise they play their best response.
    """
    base_action, base_u, base_w = no_signal_baseline(instance)
    likelihood = signal_likelihood(scheme, confusion)
    p1 = float(instance.prior @ likelihood)
    probs = (1.0 - p1, p1)
    branches: dict[int, SignalBranch] = {}
    platform = 0.0
    user = 0.0
    persuasive = True
    for s in ACTIONS:
        if probs[s] < ZERO_SIGNAL_TOL:
            continue
        prob, true_post, pred_post = posterior(scheme, instance, confusion, s)
        w = expected_user_utility(instance, true_post)
        slack = float(w[s] - w[1 - s])
        if slack >= -IC_TOL:
            action, tie = s, abs(slack) <= TIE_TOL and _best_response(instance, true_post)[1]
        else:
            persuasive = False
            action, tie = _best_response(instance, true_post)
        branches[s] = SignalBranch(s, prob, true_post, pred_post, action, slack, bool(tie))
        platform += prob * float(expected_platform_utility(instance, true_post)[action])
        user += prob * float(w[action])
    return PersuasionSolution(
        scheme=scheme,
        signal_probs=probs,
        branches=branches,
        platform_utility=platform,
        user_utility=user,
        baseline_action=base_action,
        baseline_platform_utility=base_u,
        baseline_user_utility=base_w,
        persuasive=persuasive,
        lp_value=lp_value,
    )


def uninformative_scheme(instance: Instance, action: int) -> SignalingScheme:
    return SignalingScheme.constant(instance.theta_count, 1.0 if action == SHARE else 0.0)


def solution_from_lp(instance: Instance, confusion: ConfusionModel, lp_solution: LPSolution) -> PersuasionSolution:
    if lp_solution.status is LPStatus.INFEASIBLE:
        # the uninformative scheme recommending the baseline action is always
        # IC-feasible, so this only triggers on corrupted input
        base_action = no_signal_baseline(instance)[0]
        return evaluate_scheme(instance, confusion, uninformative_scheme(instance, base_action))
    if not lp_solution.optimal:
        raise InfeasibleModel(f"signaling LP is {lp_solution.status.value}")
    return evaluate_scheme(instance, confusion, SignalingScheme(lp_solution.variables), lp_solution.objective_value)


def solve_optimal_scheme(
    instance: Instance, confusion: ConfusionModel, prefer_sharing: bool = True
) -> PersuasionSolution:
    """Platform-optimal persuasive two-signal scheme.

    The LP optimum is often not unique.  With ``prefer_sharing`` the scheme
    that maximizes the share probability is returned among all optimal ones,
    i.e. the optimal scheme that intervenes least; otherwise the first
    optimal vertex found by the simplex is returned.
    """
    lp = build_direct_lp(instance, confusion)
    sol = solve_lp(lp)
    if prefer_sharing and sol.optimal:
        share_weight = confusion.q_theta @ instance.prior
        tie_broken = solve_lp_with_secondary(lp, sol.objective_value, share_weight)
        if tie_broken.optimal:
            sol = tie_broken
    return solution_from_lp(instance, confusion, sol)


def user_welfare_check(solution: PersuasionSolution) -> float:
    """User utility gain over the no-signal baseline; never negative."""
    gain = solution.user_utility - solution.baseline_user_utility
    if gain < -WELFARE_TOL:
        raise WelfareViolation(f"user utility dropped by {-gain:.3g} under signaling")
    return max(gain, 0.0)
