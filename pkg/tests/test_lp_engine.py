import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from noisy_persuasion.errors import DimensionError, ValidationError
from noisy_persuasion.generators import random_confusion, random_instance
from noisy_persuasion.lp_engine import (
    LPStandardForm,
    LPStatus,
    build_direct_lp,
    build_reformulated_lp,
    solve_lp,
    solve_lp_with_secondary,
)
from noisy_persuasion.state_model import ConfusionModel, StateSpace

from conftest import EXAMPLE_PLATFORM

SEEDS = st.integers(0, 2**32 - 1)


def box(objective, rows=(), rhs=(), lo=0.0, hi=1.0):
    n = len(objective)
    return LPStandardForm(
        objective=np.asarray(objective, dtype=float),
        inequality_matrix=np.asarray(rows, dtype=float).reshape(-1, n),
        inequality_rhs=np.asarray(rhs, dtype=float),
        lower_bounds=np.full(n, lo),
        upper_bounds=np.full(n, hi),
    )


def test_box_maximum():
    sol = solve_lp(box([1.0, 1.0]))
    assert sol.status is LPStatus.OPTIMAL
    assert sol.objective_value == pytest.approx(2.0)
    np.testing.assert_allclose(sol.variables, [1, 1])


def test_infeasible():
    sol = solve_lp(box([1.0], rows=[[1.0]], rhs=[2.0]))
    assert sol.status is LPStatus.INFEASIBLE
    assert not sol.optimal


def test_unbounded():
    lp = LPStandardForm(np.array([1.0]), np.zeros((0, 1)), np.zeros(0), np.zeros(1), np.full(1, np.inf))
    assert solve_lp(lp).status is LPStatus.UNBOUNDED


def test_form_validation():
    with pytest.raises(DimensionError):
        box([1.0, 1.0], rows=[[1.0, 1.0]], rhs=[1.0, 2.0])
    with pytest.raises(ValidationError):
        box([1.0], lo=2.0, hi=1.0)
    with pytest.raises(ValidationError):
        box([np.nan])


def test_equality_rows():
    lp = LPStandardForm(
        objective=np.array([1.0, 2.0]),
        inequality_matrix=np.zeros((0, 2)),
        inequality_rhs=np.zeros(0),
        lower_bounds=np.zeros(2),
        upper_bounds=np.ones(2),
        equality_matrix=np.array([[1.0, 1.0]]),
        equality_rhs=np.array([1.0]),
    )
    sol = solve_lp(lp)
    np.testing.assert_allclose(sol.variables, [0, 1], atol=1e-12)


def test_direct_lp_coefficients(example, identity):
    lp = build_direct_lp(example, identity)
    np.testing.assert_allclose(lp.objective, [0.35, 1.05, -0.15, -0.45], atol=1e-15)
    assert lp.objective_constant == pytest.approx(-0.35)
    np.testing.assert_allclose(lp.inequality_matrix, [[-0.35, 1.05, -0.15, 0.45]] * 2, atol=1e-15)
    np.testing.assert_allclose(lp.inequality_rhs, [0.0, 1.0], atol=1e-15)


def test_direct_lp_indifferent_parties(example, identity):
    flat = example.with_platform_utility(np.repeat(EXAMPLE_PLATFORM[:, :1], 2, axis=1))
    np.testing.assert_array_equal(build_direct_lp(flat, identity).objective, 0.0)
    from noisy_persuasion.state_model import Instance

    bored = Instance(example.space, example.prior, example.platform_utility, np.zeros((2, 2)))
    lp = build_direct_lp(bored, identity)
    np.testing.assert_array_equal(lp.inequality_matrix, 0.0)
    assert lp.is_feasible(np.full(4, 0.3))


def test_direct_lp_optimum(example, identity):
    sol = solve_lp(build_direct_lp(example, identity))
    assert sol.objective_value == pytest.approx(0.75, abs=1e-12)


def test_dimension_mismatch(example):
    with pytest.raises(DimensionError):
        build_direct_lp(example, ConfusionModel.identity(StateSpace(1, 2)))


@st.composite
def random_lps(draw):
    seed = draw(SEEDS)
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    m = int(rng.integers(0, 5))
    rows = rng.normal(size=(m, n))
    rhs = rows @ rng.uniform(size=n) - rng.uniform(0.0, 0.5, size=m)
    if draw(st.booleans()):
        rhs = rhs + rng.uniform(0.0, 2.0, size=m)
    return box(rng.normal(size=n), rows, rhs)


@given(random_lps())
def test_matches_scipy(lp):
    sol = solve_lp(lp)
    ref = linprog(
        -lp.objective,
        A_ub=-lp.inequality_matrix if lp.inequality_matrix.size else None,
        b_ub=-lp.inequality_rhs if lp.inequality_rhs.size else None,
        bounds=list(zip(lp.lower_bounds, lp.upper_bounds)),
        method="highs",
    )
    if ref.status == 2:
        assert sol.status is LPStatus.INFEASIBLE
        return
    assert ref.status == 0
    assert sol.optimal
    assert sol.objective_value == pytest.approx(-ref.fun, abs=1e-8)
    assert lp.is_feasible(sol.variables, tol=1e-8)


@given(SEEDS)
def test_reformulation_is_equivalent(seed):
    rng = np.random.default_rng(seed)
    space = StateSpace(2, 2)
    inst, conf = random_instance(rng, space), random_confusion(rng, space)
    direct = solve_lp(build_direct_lp(inst, conf))
    reform = solve_lp(build_reformulated_lp(inst, conf))
    assert reform.objective_value == pytest.approx(direct.objective_value, abs=1e-9)


def test_signaling_lp_always_feasible(rng):
    space = StateSpace(2, 2)
    for _ in range(200):
        lp = build_direct_lp(random_instance(rng, space), random_confusion(rng, space))
        sol = solve_lp(lp)
        assert sol.optimal
        assert lp.is_feasible(sol.variables)


def test_deterministic(rng):
    space = StateSpace(2, 2)
    lp = build_direct_lp(random_instance(rng, space), random_confusion(rng, space))
    first, second = solve_lp(lp), solve_lp(lp)
    np.testing.assert_array_equal(first.variables, second.variables)
    assert first.iterations == second.iterations


def test_secondary_keeps_unique_optimum():
    lp = box([1.0, -1.0])
    for sec in ([1.0, 1.0], [-1.0, -1.0], [0.0, 5.0]):
        sol = solve_lp_with_secondary(lp, 1.0, sec)
        np.testing.assert_allclose(sol.variables, [1, 0])


def test_secondary_on_flat_objective():
    sol = solve_lp_with_secondary(box([0.0]), 0.0, [1.0])
    np.testing.assert_allclose(sol.variables, [1.0])
    assert sol.secondary_value == pytest.approx(1.0)
    assert sol.objective_value == pytest.approx(0.0)


def test_secondary_with_approximate_primary():
    sol = solve_lp_with_secondary(box([1.0, 0.0]), 0.5, [0.0, 1.0])
    assert sol.objective_value >= 0.5 - 1e-9
    assert sol.variables[1] == pytest.approx(1.0)


def test_secondary_dimension_check():
    with pytest.raises(DimensionError):
        solve_lp_with_secondary(box([1.0]), 1.0, [1.0, 2.0])


def test_secondary_selects_share_always(example, identity):
    shifted = example.with_prior([7 / 16, 7 / 16, 0.0, 1 / 8])
    lp = build_direct_lp(shifted, identity)
    value = solve_lp(lp).objective_value
    assert value == pytest.approx(15 / 16, abs=1e-12)
    # minimizing the L1 distance of the effective scheme to all-ones is
    # maximizing the total effective share probability
    sol = solve_lp_with_secondary(lp, value, identity.q_theta @ np.ones(4))
    np.testing.assert_allclose(sol.variables, 1.0, atol=1e-12)
    assert sol.objective_value == pytest.approx(15 / 16, abs=1e-12)
