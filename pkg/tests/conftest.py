"""Shared fixtures and random-instance generators."""

from __future__ import annotations

import numpy as np
import pytest

from hingeagg.aggregates import FunctionClass
from hingeagg.distributions import FiniteDistribution, LabeledSample

#: acceptance lines collected during the session, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def random_distribution(rng: np.random.Generator, n_atoms: int | None = None) -> FiniteDistribution:
    k = int(rng.integers(1, 9)) if n_atoms is None else n_atoms
    masses = rng.dirichlet(np.ones(k))
    masses /= masses.sum()
    etas = rng.uniform(0.0, 1.0, k)
    # include some exact 0, 1/2 and 1 conditional probabilities
    special = rng.random(k) < 0.2
    etas[special] = rng.choice([0.0, 0.5, 1.0], size=int(special.sum()))
    return FiniteDistribution(masses, etas)


def random_class(rng: np.random.Generator, M: int, n_atoms: int, binary: bool) -> FunctionClass:
    if binary:
        return FunctionClass(rng.choice([-1.0, 1.0], size=(M, n_atoms)))
    return FunctionClass(rng.uniform(-1.0, 1.0, size=(M, n_atoms)))


def random_sample(rng: np.random.Generator, n: int, n_atoms: int) -> LabeledSample:
    return LabeledSample(rng.integers(0, n_atoms, n), rng.choice([-1, 1], n))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
