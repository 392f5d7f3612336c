"""Seeded random states and Hamiltonians.

All generators take an explicit numpy Generator; nothing here touches
global random state.
"""

from typing import Optional

import numpy as np

from .states import DensityOperator, Provenance, StateVector
from .tensor import LinOp, SpaceSpec


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_state_vector(space: SpaceSpec, rng: np.random.Generator) -> StateVector:
    """Haar-distributed pure state."""
    return StateVector.normalized(space, _complex_gaussian(rng, space.dim))


def random_density(space: SpaceSpec, rng: np.random.Generator,
                   rank: Optional[int] = None) -> DensityOperator:
    """Random density operator G G† / Tr(G G†) with G of shape d x rank."""
    rank = space.dim if rank is None else rank
    g = _complex_gaussian(rng, (space.dim, rank))
    m = g @ g.conj().T
    m = (m + m.conj().T) / 2
    return DensityOperator(LinOp(space, m / np.trace(m).real), Provenance.FUNDAMENTAL)


def random_hermitian(space: SpaceSpec, rng: np.random.Generator,
                     scale: float = 1.0) -> LinOp:
    g = _complex_gaussian(rng, (space.dim, space.dim))
    return LinOp(space, scale * (g + g.conj().T) / 2)
