from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from noisy_persuasion.state_model import ConfusionModel, Instance, StateSpace

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("default")

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

# four joint states (m, v) in the order (0,0), (0,1), (1,0), (1,1)
EXAMPLE_PRIOR = np.array([0.35, 0.35, 0.15, 0.15])
EXAMPLE_PLATFORM = np.array([[0.0, 1.0], [-1.0, 2.0], [0.0, -1.0], [0.0, -3.0]])
EXAMPLE_USER = np.array([[0.0, -1.0], [-2.0, 1.0]])
EXAMPLE_SCHEME = np.array([1.0, 1.0, 0.0, 2.0 / 3.0])


@pytest.fixture
def space() -> StateSpace:
    return StateSpace(2, 2)


@pytest.fixture
def example(space) -> Instance:
    return Instance(space, EXAMPLE_PRIOR, EXAMPLE_PLATFORM, EXAMPLE_USER)


@pytest.fixture
def identity(space) -> ConfusionModel:
    return ConfusionModel.identity(space)


@pytest.fixture
def symmetric_noise() -> ConfusionModel:
    q = np.array([[0.75, 0.25], [0.25, 0.75]])
    return ConfusionModel.from_factors(q, q)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
