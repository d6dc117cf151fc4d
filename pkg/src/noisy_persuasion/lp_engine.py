"""Optimal-signaling linear programs and a small dense simplex solver.

Problems are stated as::

    maximize    c @ x + constant
    subject to  G @ x >= g
                E @ x == e          (optional)
                lower <= x <= upper

The solver is a two-phase bounded-variable primal simplex using Bland's
smallest-index rule for both the entering and the leaving variable, so it
terminates on degenerate problems.  It recomputes the basic solution from a
fresh factorization at every iteration; the problems in this package have a
handful of variables and rows, which makes that affordable and keeps the
arithmetic reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionError, NumericalInstability, ValidationError
from .state_model import NOT_SHARE, ConfusionModel, Instance

FEASIBILITY_TOL = 1e-9
RESIDUAL_LIMIT = 1e-7
BOUND_TOL = 1e-12
_REDUCED_COST_TOL = 1e-11
_PIVOT_TOL = 1e-9
_RATIO_TIE_TOL = 1e-12
_RELATIVE_PIVOT = 1e-6


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LPStandardForm:
    objective: NDArray[np.float64]
    inequality_matrix: NDArray[np.float64]
    inequality_rhs: NDArray[np.float64]
    lower_bounds: NDArray[np.float64]
    upper_bounds: NDArray[np.float64]
    objective_constant: float = 0.0
    equality_matrix: NDArray[np.float64] | None = None
    equality_rhs: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        c = np.asarray(self.objective, dtype=float)
        n = c.shape[0]
        G = np.asarray(self.inequality_matrix, dtype=float).reshape(-1, n)
        g = np.asarray(self.inequality_rhs, dtype=float).reshape(-1)
        lo = np.asarray(self.lower_bounds, dtype=float).reshape(-1)
        hi = np.asarray(self.upper_bounds, dtype=float).reshape(-1)
        if G.shape[0] != g.shape[0]:
            raise DimensionError("inequality matrix and rhs disagree in row count")
        if lo.shape != (n,) or hi.shape != (n,):
            raise DimensionError("bounds must have one entry per variable")
        if np.any(lo > hi):
            raise ValidationError("lower bound exceeds upper bound")
        if not np.all(np.isfinite(lo)):
            raise ValidationError("lower bounds must be finite")
        if self.equality_matrix is not None:
            E = np.asarray(self.equality_matrix, dtype=float).reshape(-1, n)
            e = np.asarray(self.equality_rhs, dtype=float).reshape(-1)
            if E.shape[0] != e.shape[0]:
                raise DimensionError("equality matrix and rhs disagree in row count")
        else:
            E = np.zeros((0, n))
            e = np.zeros(0)
        for name, arr in (("objective", c), ("inequality_matrix", G), ("inequality_rhs", g), ("equality_matrix", E), ("equality_rhs", e)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} has non-finite entries")
        for name, arr in (("objective", c), ("inequality_matrix", G), ("inequality_rhs", g),
                          ("lower_bounds", lo), ("upper_bounds", hi), ("equality_matrix", E), ("equality_rhs", e)):
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]

    def value(self, x: ArrayLike) -> float:
        return float(self.objective @ np.asarray(x, dtype=float) + self.objective_constant)

    def is_feasible(self, x: ArrayLike, tol: float = FEASIBILITY_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lower_bounds - tol) or np.any(x > self.upper_bounds + tol):
            return False
        if self.inequality_matrix.shape[0] and np.any(self.inequality_matrix @ x < self.inequality_rhs - tol):
            return False
        if self.equality_matrix.shape[0] and np.any(np.abs(self.equality_matrix @ x - self.equality_rhs) > tol):
            return False
        return True


@dataclass(frozen=True, eq=False)
class LPSolution:
    status: LPStatus
    variables: NDArray[np.float64] | None = None
    objective_value: float = float("nan")
    active_constraints: tuple[int, ...] = ()
    iterations: int = 0
    secondary_value: float | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


@dataclass
class _Simplex:
    """Mutable working state of one bounded-variable simplex solve."""

    A: NDArray[np.float64]
    b: NDArray[np.float64]
    lo: NDArray[np.float64]
    hi: NDArray[np.float64]
    basis: list[int]
    at_upper: NDArray[np.bool_]
    iterations: int = 0
    max_iterations: int = 10_000
    x: NDArray[np.float64] = field(init=False)
    cost: NDArray[np.float64] | None = field(init=False, default=None)

    def __post_init__(self) -> None:
        self.x = self._solution()

    def _nonbasic_values(self) -> NDArray[np.float64]:
        z = np.where(self.at_upper, self.hi, self.lo)
        z[self.basis] = 0.0
        return z

    def _solution(self) -> NDArray[np.float64]:
        z = self._nonbasic_values()
        B = self.A[:, self.basis]
        z[self.basis] = np.linalg.solve(B, self.b - self.A @ z)
        return z

    def run(self, cost: NDArray[np.float64]) -> LPStatus:
        """Maximize ``cost @ x`` from the current basis."""
        m, ntot = self.A.shape
        while True:
            self.iterations += 1
            if self.iterations > self.max_iterations:
                raise NumericalInstability("simplex iteration limit reached")
            B = self.A[:, self.basis]
            y = np.linalg.solve(B.T, cost[self.basis])
            reduced = cost - y @ self.A
            in_basis = np.zeros(ntot, dtype=bool)
            in_basis[self.basis] = True
            entering = -1
            for j in range(ntot):
                if in_basis[j] or self.hi[j] - self.lo[j] <= 0:
                    continue
                if (not self.at_upper[j] and reduced[j] > _REDUCED_COST_TOL) or (
                    self.at_upper[j] and reduced[j] < -_REDUCED_COST_TOL
                ):
                    entering = j
                    break
            if entering < 0:
                return LPStatus.OPTIMAL
            direction = -1.0 if self.at_upper[entering] else 1.0
            col = np.linalg.solve(B, self.A[:, entering])
            delta = -direction * col  # change of basic variables per unit step
            xb = self.x[self.basis]
            step = self.hi[entering] - self.lo[entering]
            leave_pos = -1
            leave_to_upper = False
            ratios = np.full(m, np.inf)
            to_upper = np.zeros(m, dtype=bool)
            for i, var in enumerate(self.basis):
                if delta[i] < -_PIVOT_TOL:
                    ratios[i] = max(xb[i] - self.lo[var], 0.0) / -delta[i]
                elif delta[i] > _PIVOT_TOL and np.isfinite(self.hi[var]):
                    ratios[i] = max(self.hi[var] - xb[i], 0.0) / delta[i]
                    to_upper[i] = True
            best = ratios.min() if m else np.inf
            if best < step:
                ties = np.flatnonzero(ratios <= best + _RATIO_TIE_TOL)
                # among tied rows take the largest pivot (smallest index on
                # equal pivots); round-off pivots would make the basis singular
                size = np.abs(delta[ties])
                strong = ties[size >= (1.0 - _RELATIVE_PIVOT) * size.max()]
                leave_pos = min(strong, key=lambda i: self.basis[i])
                leave_to_upper = bool(to_upper[leave_pos])
                step = best
            if not np.isfinite(step):
                return LPStatus.UNBOUNDED
            if leave_pos < 0:
                self.at_upper[entering] = not self.at_upper[entering]
            else:
                leaving = self.basis[leave_pos]
                self.at_upper[leaving] = leave_to_upper
                self.basis[leave_pos] = entering
                self.at_upper[entering] = False
            self.x = self._solution()


def solve_lp(lp: LPStandardForm) -> LPSolution:
    """Maximize ``lp`` with the two-phase bounded simplex.

    Infeasible and unbounded problems are reported through the status.
    Raises :class:`NumericalInstability` if the returned optimum violates a
    constraint by more than ``1e-7``.
    """
    return _solve(lp)[0]


def _solve(lp: LPStandardForm) -> tuple[LPSolution, _Simplex | None]:
    try:
        return _solve_unguarded(lp)
    except np.linalg.LinAlgError as exc:
        raise NumericalInstability("simplex basis became singular") from exc


def _row_scaled(M: NDArray[np.float64], r: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    scale = np.abs(M).max(axis=1, initial=0.0) if M.shape[0] else np.ones(0)
    scale = np.where(scale > 0, scale, 1.0)
    return M / scale[:, None], r / scale


def _solve_unguarded(lp: LPStandardForm) -> tuple[LPSolution, _Simplex | None]:
    n = lp.n_vars
    G, g = _row_scaled(lp.inequality_matrix, lp.inequality_rhs)
    E, e = _row_scaled(lp.equality_matrix, lp.equality_rhs)
    m1, m2 = G.shape[0], E.shape[0]
    m = m1 + m2
    ns = n + m1
    if m == 0:
        c = lp.objective
        if np.any((c > 0) & ~np.isfinite(lp.upper_bounds)):
            return LPSolution(LPStatus.UNBOUNDED), None
        x = np.where(c > 0, lp.upper_bounds, lp.lower_bounds)
        return LPSolution(LPStatus.OPTIMAL, _readonly(x), lp.value(x)), None

    A = np.zeros((m, ns + m))
    A[:m1, :n] = G
    A[:m1, n:ns] = -np.eye(m1)
    A[m1:, :n] = E
    b = np.concatenate([g, e])
    lo = np.concatenate([lp.lower_bounds, np.zeros(m1), np.zeros(m)])
    hi = np.concatenate([lp.upper_bounds, np.full(m1, np.inf), np.full(m, np.inf)])

    # Phase 1: every structural and surplus variable starts at its lower
    # bound and one artificial per row absorbs the residual.
    residual = b - A[:, :ns] @ lo[:ns]
    A[:, ns:] = np.diag(np.where(residual >= 0, 1.0, -1.0))
    state = _Simplex(A, b, lo, hi, basis=list(range(ns, ns + m)), at_upper=np.zeros(ns + m, dtype=bool),
                     max_iterations=200 * (ns + m) + 1000)
    phase1 = np.zeros(ns + m)
    phase1[ns:] = -1.0
    state.run(phase1)
    infeasibility = float(state.x[ns:].sum())
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if infeasibility > FEASIBILITY_TOL * scale:
        return LPSolution(LPStatus.INFEASIBLE, iterations=state.iterations), None

    # Phase 2: artificials are pinned to zero and may only leave the basis.
    state.hi[ns:] = 0.0
    state.x = state._solution()
    cost = np.zeros(ns + m)
    cost[:n] = lp.objective
    if state.run(cost) is LPStatus.UNBOUNDED:
        return LPSolution(LPStatus.UNBOUNDED, iterations=state.iterations), None
    state.cost = cost
    return _finish(lp, state), state


def _finish(lp: LPStandardForm, state: _Simplex, secondary: NDArray[np.float64] | None = None) -> LPSolution:
    n = lp.n_vars
    x = np.clip(state.x[:n], lp.lower_bounds, lp.upper_bounds)
    _check_residuals(lp, x)
    G, g = lp.inequality_matrix, lp.inequality_rhs
    active: tuple[int, ...] = ()
    if G.shape[0]:
        slack = G @ x - g
        limit = FEASIBILITY_TOL * max(1.0, float(np.abs(g).max()))
        active = tuple(int(i) for i in np.flatnonzero(np.abs(slack) <= limit))
    sec_value = None if secondary is None else float(secondary @ x)
    return LPSolution(LPStatus.OPTIMAL, _readonly(x), lp.value(x), active, state.iterations, sec_value)


def _readonly(x: NDArray[np.float64]) -> NDArray[np.float64]:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


def _check_residuals(lp: LPStandardForm, x: NDArray[np.float64]) -> None:
    worst = 0.0
    if lp.inequality_matrix.shape[0]:
        worst = max(worst, float(np.max(lp.inequality_rhs - lp.inequality_matrix @ x, initial=0.0)))
    if lp.equality_matrix.shape[0]:
        worst = max(worst, float(np.max(np.abs(lp.equality_matrix @ x - lp.equality_rhs), initial=0.0)))
    if worst > RESIDUAL_LIMIT:
        raise NumericalInstability(f"constraint residual {worst:.3g} at claimed optimum")


def solve_lp_with_secondary(lp: LPStandardForm, primary_value: float, secondary_objective: ArrayLike) -> LPSolution:
    """Maximize ``secondary_objective`` over the optimal face of ``lp``.

    When ``primary_value`` matches the optimum of ``lp`` the face is taken
    exactly: starting from an optimal basis, every nonbasic variable with a
    nonzero reduced cost is fixed at its bound and the simplex continues on
    the secondary objective.  Otherwise the face is approximated by the row
    ``c @ x + constant >= primary_value - 1e-9``.

    The returned ``objective_value`` is the primary objective; the secondary
    optimum is in ``secondary_value``.
    """
    sec = np.asarray(secondary_objective, dtype=float)
    if sec.shape != (lp.n_vars,):
        raise DimensionError("secondary objective must have one entry per variable")
    primary, state = _solve(lp)
    if not primary.optimal:
        return primary
    try:
        return _secondary_dispatch(lp, primary, state, primary_value, sec)
    except np.linalg.LinAlgError as exc:
        raise NumericalInstability("simplex basis became singular") from exc


def _secondary_dispatch(
    lp: LPStandardForm, primary: LPSolution, state: _Simplex | None, primary_value: float, sec: NDArray[np.float64]
) -> LPSolution:
    if abs(primary.objective_value - primary_value) <= FEASIBILITY_TOL * max(1.0, abs(primary_value)):
        if state is None:
            return _secondary_unconstrained(lp, primary, sec)
        return _secondary_on_face(lp, state, sec)
    return _secondary_with_row(lp, primary_value, sec)


def _secondary_on_face(lp: LPStandardForm, state: _Simplex, sec: NDArray[np.float64]) -> LPSolution:
    ntot = state.A.shape[1]
    B = state.A[:, state.basis]
    y = np.linalg.solve(B.T, state.cost[state.basis])
    reduced = state.cost - y @ state.A
    nonbasic = np.ones(ntot, dtype=bool)
    nonbasic[state.basis] = False
    fixed = nonbasic & (np.abs(reduced) > _REDUCED_COST_TOL)
    pinned = np.where(state.at_upper, state.hi, state.lo)
    state.lo = np.where(fixed, pinned, state.lo)
    state.hi = np.where(fixed, pinned, state.hi)
    state.at_upper = state.at_upper & ~fixed
    cost = np.zeros(ntot)
    cost[: lp.n_vars] = sec
    if state.run(cost) is LPStatus.UNBOUNDED:
        return LPSolution(LPStatus.UNBOUNDED, iterations=state.iterations)
    return _finish(lp, state, sec)


def _secondary_unconstrained(lp: LPStandardForm, primary: LPSolution, sec: NDArray[np.float64]) -> LPSolution:
    # box-only problem: coordinates with zero primary weight are free on the face
    c = lp.objective
    x = np.array(primary.variables)
    free = c == 0
    if np.any(free & (sec > 0) & ~np.isfinite(lp.upper_bounds)):
        return LPSolution(LPStatus.UNBOUNDED)
    x[free] = np.where(sec[free] > 0, lp.upper_bounds[free], lp.lower_bounds[free])
    return LPSolution(LPStatus.OPTIMAL, _readonly(x), lp.value(x), (), 0, float(sec @ x))


def _secondary_with_row(lp: LPStandardForm, primary_value: float, sec: NDArray[np.float64]) -> LPSolution:
    face_rhs = primary_value - lp.objective_constant - FEASIBILITY_TOL * max(1.0, abs(primary_value))
    has_eq = lp.equality_matrix.shape[0] > 0
    face = LPStandardForm(
        objective=sec,
        inequality_matrix=np.vstack([lp.inequality_matrix, lp.objective[None, :]]),
        inequality_rhs=np.append(lp.inequality_rhs, face_rhs),
        lower_bounds=lp.lower_bounds,
        upper_bounds=lp.upper_bounds,
        equality_matrix=lp.equality_matrix if has_eq else None,
        equality_rhs=lp.equality_rhs if has_eq else None,
    )
    sol = solve_lp(face)
    if not sol.optimal:
        return sol
    x = sol.variables
    m1 = lp.inequality_matrix.shape[0]
    return LPSolution(
        LPStatus.OPTIMAL, x, lp.value(x), tuple(i for i in sol.active_constraints if i < m1),
        sol.iterations, float(sec @ x),
    )


# ---------------------------------------------------------------------------
# the signaling programs


def _ic_coefficients(instance: Instance, confusion: ConfusionModel) -> tuple[NDArray[np.float64], float]:
    """Per-predicted-state IC weights and the prior-level user gain.

    The share IC row reads ``weights @ scheme >= 0``; the not-share IC row reads
    ``weights @ scheme >= prior_gain``.
    """
    gain = instance.user_gain * instance.prior
    return confusion.q_theta @ gain, float(gain.sum())


def build_direct_lp(instance: Instance, confusion: ConfusionModel) -> LPStandardForm:
    """Two-action signaling LP over ``P(share | predicted state)``.

    Row 0: following a share recommendation is optimal for the user.
    Row 1: following a not-share recommendation is optimal for the user.
    """
    if confusion.theta_count != instance.theta_count:
        raise DimensionError("confusion model and instance disagree on the number of states")
    n = instance.theta_count
    objective = confusion.q_theta @ (instance.platform_gain * instance.prior)
    weights, prior_gain = _ic_coefficients(instance, confusion)
    return LPStandardForm(
        objective=objective,
        inequality_matrix=np.vstack([weights, weights]),
        inequality_rhs=np.array([0.0, prior_gain]),
        lower_bounds=np.zeros(n),
        upper_bounds=np.ones(n),
        objective_constant=float(instance.prior @ instance.platform_utility[:, NOT_SHARE]),
    )


def build_reformulated_lp(instance: Instance, confusion: ConfusionModel) -> LPStandardForm:
    """The same program over ``(scheme, effective)`` with ``effective`` the scheme seen by true states.

    Objective and IC rows only touch ``pi_tilde`` and depend on the instance
    alone; the confusion matrix enters through the coupling equalities
    ``effective = Q^T scheme``.  Variables are ordered ``[scheme, effective]``.
    """
    n = instance.theta_count
    c = instance.platform_gain * instance.prior
    gain = instance.user_gain * instance.prior
    B = np.zeros((2, 2 * n))
    B[:, n:] = gain
    coupling = np.hstack([confusion.q_theta.T, -np.eye(n)])
    return LPStandardForm(
        objective=np.concatenate([np.zeros(n), c]),
        inequality_matrix=B,
        inequality_rhs=np.array([0.0, float(gain.sum())]),
        lower_bounds=np.zeros(2 * n),
        upper_bounds=np.ones(2 * n),
        objective_constant=float(instance.prior @ instance.platform_utility[:, NOT_SHARE]),
        equality_matrix=coupling,
        equality_rhs=np.zeros(n),
    )
