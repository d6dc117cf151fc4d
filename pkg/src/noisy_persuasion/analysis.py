"""Independent checks on the signaling solver.

* :func:`brute_force_value` enumerates schemes on a grid.
* :func:`concavification_value` searches Bayes-plausible posterior pairs.
* :func:`check_monotone_condition` tests convex-hull membership of one
  confusion matrix's columns in another's.
* :func:`lipschitz_probe` measures how the optimum moves with the confusion.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .bayes_core import SignalingScheme
from .errors import DimensionError, GridTooLarge, ValidationError
from .lp_engine import LPStandardForm, LPStatus, build_direct_lp, solve_lp
from .signaling import PersuasionSolution, no_signal_baseline, solve_optimal_scheme
from .state_model import NOT_SHARE, SHARE, Belief, ConfusionModel, Instance, Space

MAX_GRID_POINTS = 10**8
MAX_BRUTE_FORCE_STATES = 6
MAX_GRID_DIVISIONS = 40
IC_GRID_TOL = 1e-9
_CHUNK = 1 << 18


def _grid_divisions(grid_step: float, limit: int | None = MAX_GRID_DIVISIONS) -> int:
    if not grid_step > 0:
        raise ValidationError("grid_step must be positive")
    k = int(round(1.0 / grid_step))
    if k < 1 or abs(1.0 / k - grid_step) > 1e-5 or (limit is not None and k > limit):
        bound = f" with k <= {limit}" if limit is not None else ""
        raise ValidationError(f"grid_step must be 1/k{bound}, got {grid_step}")
    return k


# ---------------------------------------------------------------------------
# brute force over schemes


def brute_force_value(
    instance: Instance, confusion: ConfusionModel, grid_step: float
) -> tuple[float, SignalingScheme]:
    """Best IC scheme on the grid ``{0, grid_step, ..., 1}^theta_count``."""
    n = instance.theta_count
    if n > MAX_BRUTE_FORCE_STATES:
        raise GridTooLarge(f"brute force supports at most {MAX_BRUTE_FORCE_STATES} states, got {n}")
    k = _grid_divisions(grid_step)
    total = (k + 1) ** n
    if total > MAX_GRID_POINTS:
        raise GridTooLarge(f"grid has {total} points, limit is {MAX_GRID_POINTS}")
    lp = build_direct_lp(instance, confusion)
    weights = lp.inequality_matrix[0]
    ic_floor = max(0.0, float(lp.inequality_rhs[1])) - IC_GRID_TOL
    levels = np.arange(k + 1) / k

    # split the grid into an outer prefix loop and a vectorized suffix block
    suffix = n
    while suffix > 0 and (k + 1) ** suffix > _CHUNK:
        suffix -= 1
    block = np.array(list(itertools.product(levels, repeat=suffix))) if suffix else np.zeros((1, 0))
    block_obj = block @ lp.objective[n - suffix:]
    block_ic = block @ weights[n - suffix:]
    best_value = -np.inf
    best = None
    for prefix in itertools.product(levels, repeat=n - suffix):
        head = np.asarray(prefix)
        obj = block_obj + head @ lp.objective[: n - suffix]
        ic = block_ic + head @ weights[: n - suffix]
        obj = np.where(ic >= ic_floor, obj, -np.inf)
        i = int(np.argmax(obj))
        if obj[i] > best_value:
            best_value = float(obj[i])
            best = np.concatenate([head, block[i]])
    # the all-zero and all-one schemes are always on the grid and one of them is IC
    assert best is not None
    return best_value + lp.objective_constant, SignalingScheme(best)


# ---------------------------------------------------------------------------
# concave closure over posterior pairs


def _simplex_grid(n: int, k: int):
    """Yield blocks of the grid ``{x >= 0, sum x = 1, k*x integer}``."""
    bars = itertools.combinations(range(k + n - 1), n - 1)
    while True:
        chunk = np.array(list(itertools.islice(bars, _CHUNK)), dtype=float).reshape(-1, n - 1)
        if chunk.shape[0] == 0:
            return
        edges = np.hstack([np.full((chunk.shape[0], 1), -1.0), chunk, np.full((chunk.shape[0], 1), k + n - 1.0)])
        yield (np.diff(edges, axis=1) - 1.0) / k


def _belief_value(instance: Instance, beliefs: NDArray[np.float64]) -> NDArray[np.float64]:
    """Platform value under the user's best response, one per row; ties favor the platform."""
    w = beliefs @ instance.user_utility_by_theta
    u = beliefs @ instance.platform_utility
    gap = w[:, SHARE] - w[:, NOT_SHARE]
    tie = np.abs(gap) <= 1e-9
    return np.where(tie, u.max(axis=1), np.where(gap > 0, u[:, SHARE], u[:, NOT_SHARE]))


def concavification_value(
    instance: Instance,
    confusion: ConfusionModel,
    grid_step: float = 0.02,
    restrict_to_achievable: bool = True,
) -> float:
    """Best Bayes-plausible two-posterior split of the prior.

    One posterior runs over a grid on the predicted simplex, mapped to true
    beliefs through the inverse confusion.  Its partner lies on the ray from
    that posterior through the prior; along the ray the split value is a
    ratio of affine functions on each side of the indifference plane, so it
    suffices to check the ray's end and its indifference crossing.

    With ``restrict_to_achievable`` only splits that some scheme over
    predicted states can produce are kept: under classifier noise the
    achievable splits form a strict subset of all Bayes-plausible ones.
    The result is then a lower bound on the LP optimum that tightens as the
    grid is refined.  Without the restriction this is the unconstrained
    closure, which can exceed the LP optimum when the confusion is noisy.
    """
    prior = instance.prior
    n = instance.theta_count
    k = _grid_divisions(grid_step, limit=None)
    total = math.comb(k + n - 1, n - 1)
    if total > MAX_GRID_POINTS:
        raise GridTooLarge(f"simplex grid has {total} points, limit is {MAX_GRID_POINTS}")
    base = float(_belief_value(instance, prior[None, :])[0])
    best = base
    gain = instance.user_gain
    support = prior > 0
    inv_t = confusion.v_theta.T
    for pred in _simplex_grid(n, k):
        post = pred @ confusion.v_theta.T
        ok = np.all(post >= -1e-12, axis=1) & np.all((post <= 1e-12) | support, axis=1)
        post = np.clip(post[ok], 0.0, None)
        if post.shape[0] == 0:
            continue
        post /= post.sum(axis=1, keepdims=True)
        diff = prior - post  # direction of the partner ray
        # end of the ray: largest t with prior + t * diff >= 0
        with np.errstate(divide="ignore", invalid="ignore"):
            limits = np.where(diff < -1e-15, prior / -diff, np.inf)
        t_end = limits.min(axis=1)
        if restrict_to_achievable:
            # share-signal weight p = t / (1 + t); the scheme is p * g with
            # g = Q^{-T}(post / prior) and must stay inside [0, 1]
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(support, post / np.where(support, prior, 1.0), 0.0) @ inv_t.T
            g_max = g.max(axis=1)
            feasible = np.all(g >= -1e-12, axis=1) & (g_max > 0)
            p_max = np.where(feasible, np.minimum(1.0, 1.0 / np.where(g_max > 0, g_max, 1.0)), 0.0)
            with np.errstate(divide="ignore"):
                t_cap = np.where(p_max < 1.0, p_max / (1.0 - p_max), np.inf)
            t_end = np.where(feasible, np.minimum(t_end, t_cap), 0.0)
        moving = np.isfinite(t_end) & (t_end > 1e-15) & (np.abs(diff).max(axis=1) > 1e-15)
        if not moving.any():
            continue
        post, diff, t_end = post[moving], diff[moving], t_end[moving]
        value_here = _belief_value(instance, post)
        candidates = [t_end]
        # indifference crossing of the partner prior + t * diff
        slope = diff @ gain
        level = float(prior @ gain)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_cross = np.where(np.abs(slope) > 1e-15, -level / slope, -1.0)
        candidates.append(np.where((t_cross > 0) & (t_cross < t_end), t_cross, t_end))
        for t in candidates:
            partner = np.clip(prior + t[:, None] * diff, 0.0, None)
            partner /= partner.sum(axis=1, keepdims=True)
            partner_value = _belief_value(instance, partner)
            # exact ties on the crossing: the user breaks them for the platform
            on_plane = np.abs(partner @ gain) <= 1e-7
            if on_plane.any():
                u = partner[on_plane] @ instance.platform_utility
                partner_value[on_plane] = u.max(axis=1)
            p = t / (1.0 + t)
            split = p * value_here + (1.0 - p) * partner_value
            best = max(best, float(split.max()))
    return best


# ---------------------------------------------------------------------------
# indifference plane


def indifference_gap(instance: Instance, confusion: ConfusionModel, belief: Belief) -> float:
    """``w1 - w0`` at a predicted belief, evaluated through its true belief."""
    if belief.space_tag is not Space.PREDICTED:
        raise ValidationError("indifference_gap expects a belief over predicted states")
    if len(belief) != instance.theta_count:
        raise DimensionError("belief dimension does not match the instance")
    true = confusion.v_theta @ belief.probs
    return float(true @ instance.user_gain)


@dataclass(frozen=True)
class PosteriorLocation:
    signal: int
    boundary_distance: float
    indifference_gap: float

    def located(self, tol: float = 1e-6) -> bool:
        return self.boundary_distance <= tol or abs(self.indifference_gap) <= tol


def posterior_locations(
    instance: Instance, confusion: ConfusionModel, solution: PersuasionSolution
) -> list[PosteriorLocation]:
    """Distance of each sent predicted posterior to the simplex boundary and its gap."""
    out = []
    for s, branch in sorted(solution.branches.items()):
        pred = branch.predicted_posterior
        out.append(PosteriorLocation(s, float(pred.probs.min()), indifference_gap(instance, confusion, pred)))
    return out


def strictly_improving(instance: Instance, confusion: ConfusionModel, margin: float = 1e-6) -> bool:
    _, base, _ = no_signal_baseline(instance)
    return solve_optimal_scheme(instance, confusion).platform_utility > base + margin


# ---------------------------------------------------------------------------
# convex-hull monotonicity condition


@dataclass(frozen=True, eq=False)
class HullMembership:
    """Whether one column of the first confusion is a convex mix of the second's columns.

    ``weights`` holds the mixing coefficients for members.  For non-members
    ``violation_certificate`` is ``(b, margin)`` with
    ``b @ column - max_j b @ q2[:, j] = margin > 0``.
    """

    column: int
    is_member: bool
    weights: NDArray[np.float64] | None
    violation_certificate: tuple[NDArray[np.float64], float] | None
    proof_backed: bool


def _membership_lp(q2: NDArray[np.float64], column: NDArray[np.float64]) -> LPStandardForm:
    n = q2.shape[1]
    return LPStandardForm(
        objective=np.zeros(n),
        inequality_matrix=np.zeros((0, n)),
        inequality_rhs=np.zeros(0),
        lower_bounds=np.zeros(n),
        upper_bounds=np.ones(n),
        equality_matrix=np.vstack([q2, np.ones((1, n))]),
        equality_rhs=np.append(column, 1.0),
    )


def _separating_certificate(q2: NDArray[np.float64], column: NDArray[np.float64]) -> tuple[NDArray[np.float64], float]:
    # maximize b @ column - t  subject to  t >= b @ q2[:, j],  b, t in [-1, 1]
    d, n = q2.shape
    lp = LPStandardForm(
        objective=np.append(column, -1.0),
        inequality_matrix=np.hstack([-q2.T, np.ones((n, 1))]),
        inequality_rhs=np.zeros(n),
        lower_bounds=-np.ones(d + 1),
        upper_bounds=np.ones(d + 1),
    )
    sol = solve_lp(lp)
    b = np.array(sol.variables[:d])
    margin = float(b @ column - (b @ q2).max())
    return b, margin


def _joint_matrix(q: ConfusionModel | ArrayLike) -> NDArray[np.float64]:
    if isinstance(q, ConfusionModel):
        return q.q_theta
    arr = np.asarray(q, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"confusion must be a square matrix, got shape {arr.shape}")
    return arr


def check_monotone_condition(q1: ConfusionModel | ArrayLike, q2: ConfusionModel | ArrayLike) -> list[HullMembership]:
    """Hull membership of every column of ``q1`` in the columns of ``q2``.

    All columns being members means ``q1 = q2 @ L`` for a column-stochastic
    ``L``.  The guarantee that this makes ``q2`` weakly better for the
    platform is marked proof-backed only when both matrices are symmetric.
    Plain matrices are accepted so that singular confusions can be tested.
    """
    a, b = _joint_matrix(q1), _joint_matrix(q2)
    if a.shape != b.shape:
        raise DimensionError(f"confusions have shapes {a.shape} and {b.shape}")
    backed = bool(np.allclose(a, a.T, atol=1e-12) and np.allclose(b, b.T, atol=1e-12))
    results = []
    for i in range(a.shape[1]):
        col = a[:, i]
        sol = solve_lp(_membership_lp(b, col))
        if sol.optimal:
            weights = np.clip(np.array(sol.variables), 0.0, None)
            weights /= weights.sum()
            results.append(HullMembership(i, True, weights, None, backed))
        elif sol.status is LPStatus.INFEASIBLE:
            results.append(HullMembership(i, False, None, _separating_certificate(b, col), backed))
        else:  # pragma: no cover - a box-bounded feasibility LP is never unbounded
            raise ValidationError(f"hull membership LP returned {sol.status.value}")
    return results


# ---------------------------------------------------------------------------
# continuity in the confusion matrix


@dataclass(frozen=True)
class LipschitzReport:
    delta_q: float
    delta_u: float
    ratio: float
    bound_estimate: float
    slope_estimate: float
    inverse_norm: float


def _indifference_extremes(instance: Instance, confusion: ConfusionModel) -> list[tuple[float, float]]:
    """Smallest and largest value of each predicted coordinate on the indifference plane.

    The plane within the predicted simplex is a polytope, so each extreme is
    a small LP.  An empty plane gives an empty list.
    """
    n = instance.theta_count
    normal = confusion.v_theta.T @ instance.user_gain
    extremes = []
    for j in range(n):
        unit = np.zeros(n)
        unit[j] = 1.0
        values = []
        for sign in (-1.0, 1.0):
            lp = LPStandardForm(
                objective=sign * unit,
                inequality_matrix=np.zeros((0, n)),
                inequality_rhs=np.zeros(0),
                lower_bounds=np.zeros(n),
                upper_bounds=np.ones(n),
                equality_matrix=np.vstack([np.ones(n), normal]),
                equality_rhs=np.array([1.0, 0.0]),
            )
            sol = solve_lp(lp)
            if not sol.optimal:
                return []
            values.append(float(sol.variables[j]))
        extremes.append((values[0], values[1]))
    return extremes


def _slope_estimate(instance: Instance, confusion: ConfusionModel) -> float:
    spread = instance.utility_range
    total = 0.0
    for low, high in _indifference_extremes(instance, confusion):
        terms = [spread / d for d in (1.0 - low, high) if d > 1e-12]
        total += max(terms, default=0.0)
    return total


def lipschitz_probe(instance: Instance, q1: ConfusionModel, q2: ConfusionModel) -> LipschitzReport:
    """Change of the optimal platform value between two confusions.

    ``bound_estimate`` is ``|Theta| * (3 * c + M**2 * u_max)``: ``M`` is the
    larger inverse norm, ``u_max`` the largest platform utility magnitude and
    ``c`` the summed directional slope bound of the closure, taken from the
    extreme indifference-plane coordinates of either confusion.
    """
    if q1.q_theta.shape != q2.q_theta.shape:
        raise DimensionError("confusions must have the same dimensions")
    u1 = solve_optimal_scheme(instance, q1).platform_utility
    u2 = solve_optimal_scheme(instance, q2).platform_utility
    delta_q = float(np.abs(q1.q_theta - q2.q_theta).sum(axis=1).max())
    delta_u = abs(u1 - u2)
    ratio = delta_u / delta_q if delta_q > 0 else 0.0
    inverse_norm = max(
        float(np.abs(q1.v_theta).sum(axis=1).max()), float(np.abs(q2.v_theta).sum(axis=1).max())
    )
    slope = max(_slope_estimate(instance, q1), _slope_estimate(instance, q2))
    u_max = float(np.abs(instance.platform_utility).max())
    bound = instance.theta_count * (3.0 * slope + inverse_norm**2 * u_max)
    return LipschitzReport(delta_q, delta_u, ratio, bound, slope, inverse_norm)
