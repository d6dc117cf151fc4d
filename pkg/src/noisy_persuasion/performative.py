"""The repeated (performative) persuasion process.

Each round the platform deploys an optimal scheme for the current prior;
shared content then feeds back into the next prior::

    next_prior = lam * prior + (1 - lam) * share_posterior

Ties between optimal schemes are broken toward the share posterior of the
previous round.  The share posterior is a ratio of linear functions of the
scheme, so the L1 distance to a target posterior is minimized exactly with
the Charnes-Cooper change of variables ``y = scheme / P(share)``,
``scale = 1 / P(share)``, which turns it into an LP over the optimal face.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .bayes_core import ZERO_SIGNAL_TOL, SignalingScheme
from .errors import PersuasionError, PreconditionError, ValidationError
from .lp_engine import LPStandardForm, build_direct_lp, solve_lp_with_secondary
from .signaling import PersuasionSolution, evaluate_scheme, solve_optimal_scheme
from .state_model import NOT_SHARE, SHARE, Belief, ConfusionModel, Instance, PerformativeConfig

__all__ = [
    "PerformativeConfig",
    "PerformativeRound",
    "PerformativeTrace",
    "RoundError",
    "check_monotone_utility",
    "closest_share_posterior_scheme",
    "monotone_hypothesis",
    "normalization_constant",
    "performative_step",
    "run_performative",
]

STABILITY_TOL = 1e-12
SEGMENT_TOL = 1e-6
MONOTONE_SLACK = 1e-9


class RoundError(PersuasionError):
    """A solver failure inside the process, tagged with its round index."""

    def __init__(self, round_index: int, cause: Exception):
        super().__init__(f"round {round_index}: {cause}")
        self.round_index = round_index
        self.cause = cause


def performative_step(
    instance: Instance, confusion: ConfusionModel, solution: PersuasionSolution, lam: float
) -> Belief:
    """Next-round prior; unchanged when the share signal is never sent."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam}")
    prior = instance.prior
    branch = solution.branches.get(SHARE)
    if branch is None or branch.probability < ZERO_SIGNAL_TOL:
        return Belief.true(prior)
    nxt = lam * prior + (1.0 - lam) * branch.true_posterior.probs
    nxt = np.clip(nxt, 0.0, None)
    return Belief.true(nxt / nxt.sum())


def _lifted_face_lp(instance: Instance, confusion: ConfusionModel, optimum: float, target: NDArray[np.float64]) -> LPStandardForm:
    """Charnes-Cooper form of the signaling LP plus L1 slack variables.

    Variables ``[y (n), scale, e (n)]``.  The objective is the (scaled) gap to
    the optimum, which is at most zero, so its optimal face is the set of
    optimal schemes with a positive share probability.
    """
    n = instance.theta_count
    base = build_direct_lp(instance, confusion)
    weights = base.inequality_matrix[0]
    prior_gain = float(base.inequality_rhs[1])
    q = confusion.q_theta
    # predicted share posterior = share_map @ y
    share_map = q @ (instance.prior[:, None] * q.T)
    nv = 2 * n + 1
    rows = []
    rhs = []

    def row(y=None, scale=0.0, e=None):
        r = np.zeros(nv)
        if y is not None:
            r[:n] = y
        r[n] = scale
        if e is not None:
            r[n + 1:] = e
        return r

    rows.append(row(y=weights))
    rhs.append(0.0)
    rows.append(row(y=weights, scale=-prior_gain))
    rhs.append(0.0)
    eye = np.eye(n)
    for i in range(n):
        rows.append(row(y=-eye[i], scale=1.0))
        rhs.append(0.0)
    for i in range(n):
        rows.append(row(y=-share_map[i], e=eye[i]))
        rhs.append(-target[i])
        rows.append(row(y=share_map[i], e=eye[i]))
        rhs.append(target[i])
    share_weight = q @ instance.prior
    objective = row(y=base.objective, scale=base.objective_constant - optimum)
    return LPStandardForm(
        objective=objective,
        inequality_matrix=np.array(rows),
        inequality_rhs=np.array(rhs),
        lower_bounds=np.zeros(nv),
        upper_bounds=np.full(nv, np.inf),
        equality_matrix=row(y=share_weight)[None, :],
        equality_rhs=np.array([1.0]),
    )


def closest_share_posterior_scheme(
    instance: Instance, confusion: ConfusionModel, optimum: float, target: Belief
) -> tuple[SignalingScheme, float] | None:
    """Optimal scheme whose predicted share posterior is L1-closest to ``target``.

    Returns ``(scheme, distance)``, or ``None`` when no optimal scheme sends
    the share signal with positive probability.
    """
    n = instance.theta_count
    lifted = _lifted_face_lp(instance, confusion, optimum, target.probs)
    secondary = np.zeros(2 * n + 1)
    secondary[n + 1:] = -1.0
    sol = solve_lp_with_secondary(lifted, 0.0, secondary)
    if not sol.optimal:
        return None
    y, scale = sol.variables[:n], sol.variables[n]
    if scale <= 0:
        return None
    share = np.clip(y / scale, 0.0, 1.0)
    return SignalingScheme(share), float(-sol.secondary_value)


@dataclass(frozen=True, eq=False)
class PerformativeRound:
    index: int
    prior: Belief
    solution: PersuasionSolution
    alpha: float
    platform_utility: float
    distance_to_target: float | None
    tie_break_distance: float | None
    segment_residual: float


@dataclass(frozen=True, eq=False)
class PerformativeTrace:
    config: PerformativeConfig
    rounds: tuple[PerformativeRound, ...]
    target_posterior: Belief | None
    target_predicted: Belief | None
    converged_at: int | None
    stable_at: int | None
    degenerate_at: int | None
    monotone_utility: bool
    normalization: float
    alpha_recursion_ok: bool
    segment_violations: tuple[int, ...] = field(default=())

    @property
    def raw_platform_utilities(self) -> NDArray[np.float64]:
        return np.array([r.solution.platform_utility for r in self.rounds])

    @property
    def reported_utilities(self) -> NDArray[np.float64]:
        return np.array([r.platform_utility for r in self.rounds])

    @property
    def alphas(self) -> NDArray[np.float64]:
        return np.array([r.alpha for r in self.rounds])

    @property
    def distances(self) -> NDArray[np.float64]:
        return np.array([np.nan if r.distance_to_target is None else r.distance_to_target for r in self.rounds])

    @property
    def final_prior(self) -> Belief:
        return self.rounds[-1].prior


def normalization_constant(instance: Instance) -> float:
    """Largest not-share platform utility; subtracting it makes not-sharing non-positive."""
    return float(instance.platform_utility[:, NOT_SHARE].max())


def _segment_coordinate(point: NDArray[np.float64], start: NDArray[np.float64] | None, end: NDArray[np.float64] | None) -> tuple[float, float]:
    """Projection coefficient of ``point`` on ``[start, end]`` and its residual."""
    if end is None:
        return 0.0, 0.0 if start is None else float(np.max(np.abs(point - start)))
    if start is None:
        return 1.0, float(np.max(np.abs(point - end)))
    d = end - start
    dd = float(d @ d)
    if dd <= 1e-24:
        return 1.0, float(np.max(np.abs(point - end)))
    alpha = float((point - start) @ d / dd)
    alpha = min(max(alpha, 0.0), 1.0)
    return alpha, float(np.max(np.abs(start + alpha * d - point)))


def _share_distance(solution: PersuasionSolution, target: Belief) -> float:
    share = solution.posteriors(SHARE)
    return np.inf if share is None else float(np.abs(share[1].probs - target.probs).sum())


def _solve_round(
    instance: Instance,
    confusion: ConfusionModel,
    previous_share: Belief | None,
    previous_scheme: SignalingScheme | None,
) -> tuple[PersuasionSolution, float | None]:
    """Optimal solution for one round, tie-broken toward ``previous_share``.

    The lifted LP gets badly conditioned once some prior entries are tiny, so
    its answer competes with the canonical optimum and with last round's
    scheme; the optimal candidate with the closest share posterior wins.
    """
    solution = solve_optimal_scheme(instance, confusion)
    if previous_share is None:
        return solution, None
    optimum = solution.platform_utility
    candidates = [solution]
    try:
        closest = closest_share_posterior_scheme(instance, confusion, optimum, previous_share)
    except PersuasionError:
        closest = None
    if closest is not None:
        candidates.append(evaluate_scheme(instance, confusion, closest[0], solution.lp_value))
    if previous_scheme is not None:
        candidates.append(evaluate_scheme(instance, confusion, previous_scheme, solution.lp_value))
    optimal = [solution] + [c for c in candidates[1:] if c.persuasive and abs(c.platform_utility - optimum) <= 1e-9 * max(1.0, abs(optimum))]
    best = min(optimal, key=lambda c: _share_distance(c, previous_share))
    dist = _share_distance(best, previous_share)
    return best, (None if not np.isfinite(dist) else dist)


def run_performative(instance: Instance, confusion: ConfusionModel, config: PerformativeConfig) -> PerformativeTrace:
    """Simulate the process until stability, degeneracy or ``max_rounds``."""
    lam = config.lam
    c_n = normalization_constant(instance) if config.normalize else 0.0
    rounds: list[PerformativeRound] = []
    belief = Belief.true(instance.prior)
    previous_share: Belief | None = None
    previous_scheme: SignalingScheme | None = None
    target_true = target_pred = None
    seg_start = seg_end = None
    converged_at = stable_at = degenerate_at = None
    violations = []
    for t in range(config.max_rounds):
        current = instance.with_prior(belief.probs)
        try:
            solution, tie_dist = _solve_round(current, confusion, previous_share, previous_scheme)
        except PersuasionError as exc:
            raise RoundError(t, exc) from exc
        if t == 0:
            share = solution.posteriors(SHARE)
            keep = solution.posteriors(NOT_SHARE)
            if share is not None:
                target_true, target_pred = share
                seg_end = target_pred.probs
            if keep is not None:
                seg_start = keep[1].probs
        belief_pred = confusion.q_theta @ belief.probs
        alpha, residual = _segment_coordinate(belief_pred, seg_start, seg_end)
        if residual > SEGMENT_TOL:
            violations.append(t)
        distance = None if target_pred is None else float(np.max(np.abs(belief_pred - target_pred.probs)))
        if converged_at is None and distance is not None and distance <= config.tolerance:
            converged_at = t
        rounds.append(
            PerformativeRound(
                index=t,
                prior=belief,
                solution=solution,
                alpha=alpha,
                platform_utility=solution.platform_utility - c_n,
                distance_to_target=distance,
                tie_break_distance=tie_dist,
                segment_residual=residual,
            )
        )
        nxt = performative_step(current, confusion, solution, lam)
        if solution.share_probability < ZERO_SIGNAL_TOL:
            degenerate_at = t
        if float(np.max(np.abs(nxt.probs - belief.probs))) <= STABILITY_TOL:
            stable_at = t
            break
        if degenerate_at is not None:
            break
        share = solution.posteriors(SHARE)
        previous_share = None if share is None else share[1]
        previous_scheme = solution.scheme
        belief = nxt

    utilities = np.array([r.platform_utility for r in rounds])
    monotone = bool(np.all(np.diff(utilities) >= -MONOTONE_SLACK))
    alphas = np.array([r.alpha for r in rounds])
    alpha_ok = bool(np.all(np.abs(alphas[1:] - ((1.0 - lam) + lam * alphas[:-1])) <= 1e-8))
    return PerformativeTrace(
        config=config,
        rounds=tuple(rounds),
        target_posterior=target_true,
        target_predicted=target_pred,
        converged_at=converged_at,
        stable_at=stable_at,
        degenerate_at=degenerate_at,
        monotone_utility=monotone,
        normalization=c_n,
        alpha_recursion_ok=alpha_ok,
        segment_violations=tuple(violations),
    )


def monotone_hypothesis(instance: Instance) -> tuple[bool, bool]:
    """``(normalized baseline utility > 0, default action is share)`` at the prior."""
    from .signaling import no_signal_baseline

    action, platform, _ = no_signal_baseline(instance)
    return platform - normalization_constant(instance) > 0, action == SHARE


def check_monotone_utility(trace: PerformativeTrace, instance: Instance) -> bool:
    """Whether normalized platform utility never decreases along a ``lam = 0`` trace."""
    if trace.config.lam != 0:
        raise PreconditionError(f"monotone-utility check needs lambda = 0, trace has {trace.config.lam}")
    normalized = trace.raw_platform_utilities - normalization_constant(instance)
    return bool(np.all(np.diff(normalized) >= -MONOTONE_SLACK))
