"""Seeded random instances and confusion matrices for property checks."""

from __future__ import annotations

import numpy as np

from .signaling import no_signal_baseline, solve_optimal_scheme
from .state_model import NOT_SHARE, SHARE, ConfusionModel, Instance, StateSpace

# theta_count -> (m_count, v_count); the user needs at least two ground truths
SPACES = {2: StateSpace(1, 2), 4: StateSpace(2, 2), 6: StateSpace(3, 2), 8: StateSpace(2, 4)}

PRIOR_FLOOR = 0.02
MIN_USER_MARGIN = 1e-3


def space_for(theta_count: int) -> StateSpace:
    try:
        return SPACES[theta_count]
    except KeyError:
        raise ValueError(f"no default state space with {theta_count} states") from None


def random_column_stochastic(rng: np.random.Generator, n: int, min_diagonal: float = 0.55) -> np.ndarray:
    """Column-stochastic matrix whose diagonal holds most of each column.

    Columns are ``d * e_i + (1 - d) * dirichlet`` with ``d >= min_diagonal``,
    so the matrix is strictly diagonally dominant by columns and invertible.
    """
    if n == 1:
        return np.ones((1, 1))
    mass = rng.uniform(min_diagonal, 0.95, size=n)
    noise = rng.dirichlet(np.ones(n), size=n).T
    return noise * (1.0 - mass) + np.diag(mass)


def random_stochastic(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Column-stochastic ``rows x cols`` matrix with Dirichlet(1) columns."""
    return rng.dirichlet(np.ones(rows), size=cols).T


def random_confusion(rng: np.random.Generator, space: StateSpace, min_diagonal: float = 0.55) -> ConfusionModel:
    return ConfusionModel.from_factors(
        random_column_stochastic(rng, space.m_count, min_diagonal),
        random_column_stochastic(rng, space.v_count, min_diagonal),
    )


def random_instance(
    rng: np.random.Generator,
    space: StateSpace,
    aligned: bool = True,
    max_tries: int = 1000,
) -> Instance:
    """Random instance with full-support prior and a strict user preference at it.

    Utilities are uniform on [-3, 3].  With ``aligned`` the sample is redrawn
    until each action is (weakly) preferred by both parties in some state.
    """
    n = space.theta_count
    for _ in range(max_tries):
        prior = rng.dirichlet(np.ones(n)) * (1.0 - n * PRIOR_FLOOR) + PRIOR_FLOOR
        inst = Instance(
            space,
            prior,
            rng.uniform(-3.0, 3.0, size=(n, 2)),
            rng.uniform(-3.0, 3.0, size=(space.v_count, 2)),
        )
        if aligned and inst.alignment_violations():
            continue
        if abs(float(prior @ inst.user_gain)) < MIN_USER_MARGIN:
            continue
        return inst
    raise RuntimeError("could not sample a valid instance")


def random_model(
    rng: np.random.Generator, theta_count: int, noisy: bool = True, aligned: bool = True
) -> tuple[Instance, ConfusionModel]:
    space = space_for(theta_count)
    inst = random_instance(rng, space, aligned=aligned)
    conf = random_confusion(rng, space) if noisy else ConfusionModel.identity(space)
    return inst, conf


def random_improving_model(
    rng: np.random.Generator, theta_count: int, noisy: bool = True, margin: float = 1e-6, max_tries: int = 1000
) -> tuple[Instance, ConfusionModel]:
    """Random model whose optimal scheme strictly beats the no-signal baseline."""
    for _ in range(max_tries):
        inst, conf = random_model(rng, theta_count, noisy)
        _, base, _ = no_signal_baseline(inst)
        if solve_optimal_scheme(inst, conf).platform_utility > base + margin:
            return inst, conf
    raise RuntimeError("could not sample a strictly improving model")


def random_monotone_hypothesis_model(
    rng: np.random.Generator, theta_count: int, noisy: bool = True, max_tries: int = 1000
) -> tuple[Instance, ConfusionModel]:
    """Random model with share as the default action and positive normalized value."""
    for _ in range(max_tries):
        inst, conf = random_model(rng, theta_count, noisy)
        action, base, _ = no_signal_baseline(inst)
        c_n = float(inst.platform_utility[:, NOT_SHARE].max())
        if action == SHARE and base - c_n > 0:
            return inst, conf
    raise RuntimeError("could not sample a model satisfying the monotone-utility hypothesis")
