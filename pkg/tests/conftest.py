import numpy as np
import pytest
from hypothesis import strategies as st

from src.sampling import random_density
from src.states import StateVector, pure
from src.tensor import SpaceSpec

SEEDS = st.integers(min_value=0, max_value=2 ** 32 - 1)


def qubits(*labels):
    return SpaceSpec.of(*((label, 2) for label in labels))


def bell_state(space=None):
    """(|00> + |11>)/sqrt(2) on two qubits."""
    space = space or qubits("A", "B")
    return pure(StateVector(space, np.array([1, 0, 0, 1]) / np.sqrt(2)))


def correlated_state(c_plus, c_minus, space=None):
    """c+|0>|0> + c-|1>|1>, the system-pointer correlation after a premeasurement."""
    space = space or qubits("S", "P")
    return pure(StateVector(space, np.array([c_plus, 0, 0, c_minus])))


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def two_by_three():
    return SpaceSpec.of(("A", 2), ("B", 3))


@pytest.fixture
def random_corpus(rng, two_by_three):
    """Seeded random states over 2x2 and 2x3, pure and mixed."""
    corpus = []
    for space in (qubits("A", "B"), two_by_three):
        for k in range(100):
            corpus.append(random_density(space, rng, rank=1 if k % 2 else None))
    return corpus
