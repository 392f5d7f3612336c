"""Density operators, state vectors and expectation values.

Provenance tags record how a density operator was obtained. They never
change numerics: a proper mixture and a reduced state with the same matrix
give identical expectation values, purities and distances.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.special import entr

from .tensor import TOLERANCE, LinOp, SpaceError, SpaceSpec, tensor_product


class StateError(Exception):
    """A state or observable violates its defining constraints."""
    pass


class Provenance(Enum):
    FUNDAMENTAL = "fundamental"
    REDUCED = "reduced"
    COARSE_GRAINED = "coarse-grained"
    PROPER_MIXTURE = "proper-mixture"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector on a SpaceSpec."""
    space: SpaceSpec
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != self.space.dim:
            raise SpaceError(
                f"{amps.shape[0]} amplitudes do not fit {self.space} (dim {self.space.dim})"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > TOLERANCE:
            raise StateError(f"state vector has norm {norm!r}, expected 1")
        amps.setflags(write=False)
        object.__setattr__(self, 'amplitudes', amps)

    @classmethod
    def basis(cls, space: SpaceSpec, index: int) -> 'StateVector':
        if not 0 <= index < space.dim:
            raise SpaceError(f"basis index {index} out of range for {space}")
        amps = np.zeros(space.dim, dtype=np.complex128)
        amps[index] = 1.0
        return cls(space, amps)

    @classmethod
    def normalized(cls, space: SpaceSpec, amplitudes: Sequence[complex]) -> 'StateVector':
        """Normalize arbitrary nonzero amplitudes."""
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise StateError("cannot normalize the zero vector")
        return cls(space, amps / norm)


def product_state(a: StateVector, b: StateVector) -> StateVector:
    """|a> ⊗ |b> on the concatenated space."""
    return StateVector(a.space.concat(b.space), np.kron(a.amplitudes, b.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Unit-trace, Hermitian, positive semidefinite operator with a provenance tag."""
    op: LinOp
    provenance: Provenance = Provenance.FUNDAMENTAL

    def __post_init__(self):
        m = self.op.matrix
        tr = np.trace(m)
        if abs(tr - 1.0) > TOLERANCE:
            raise StateError(f"density operator has trace {tr!r}, expected 1")
        herm = float(np.linalg.norm(m - m.conj().T))
        if herm >= TOLERANCE:
            raise StateError(f"density operator is not Hermitian (residual {herm:.3e})")
        lowest = float(linalg.eigvalsh(m)[0])
        if lowest < -TOLERANCE:
            raise StateError(f"density operator has negative eigenvalue {lowest:.3e}")

    @property
    def space(self) -> SpaceSpec:
        return self.op.space

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    def __repr__(self) -> str:
        return f"DensityOperator({self.space}, {self.provenance})"


def pure(v: StateVector) -> DensityOperator:
    """|psi><psi|, tagged fundamental."""
    a = v.amplitudes
    return DensityOperator(LinOp(v.space, np.outer(a, a.conj())), Provenance.FUNDAMENTAL)


def proper_mixture(weights: Sequence[float], states: Sequence[DensityOperator]) -> DensityOperator:
    """Convex combination of prepared states, tagged proper-mixture."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if len(w) != len(states) or len(states) == 0:
        raise StateError(f"{len(w)} weights for {len(states)} states")
    if np.any(w < 0):
        raise StateError(f"mixture weights must be nonnegative, got {w.tolist()}")
    if abs(w.sum() - 1.0) > TOLERANCE:
        raise StateError(f"mixture weights sum to {w.sum()!r}, expected 1")
    space = states[0].space
    matrix = np.zeros((space.dim, space.dim), dtype=np.complex128)
    for weight, rho in zip(w, states):
        if rho.space != space:
            raise SpaceError(f"space mismatch in mixture: {rho.space} vs {space}")
        matrix += weight * rho.matrix
    return DensityOperator(LinOp(space, matrix), Provenance.PROPER_MIXTURE)


def maximally_mixed(space: SpaceSpec,
                    provenance: Provenance = Provenance.FUNDAMENTAL) -> DensityOperator:
    return DensityOperator(LinOp(space, np.eye(space.dim) / space.dim), provenance)


def product(a: DensityOperator, b: DensityOperator,
            provenance: Optional[Provenance] = None) -> DensityOperator:
    """rho_a ⊗ rho_b.

    The factors' common tag is kept; factors with different tags need an
    explicit `provenance`.
    """
    if provenance is None:
        if a.provenance != b.provenance:
            raise StateError(
                f"factors tagged {a.provenance} and {b.provenance}: pass a provenance"
            )
        provenance = a.provenance
    return DensityOperator(tensor_product(a.op, b.op), provenance)


def expectation(rho: DensityOperator, o: LinOp) -> float:
    """Tr(rho O) for a Hermitian observable O."""
    if rho.space != o.space:
        raise SpaceError(f"space mismatch: state on {rho.space}, observable on {o.space}")
    if not o.is_hermitian():
        raise StateError("observable is not Hermitian")
    # Tr(rho O) = sum_ij rho_ij O_ji
    value = np.sum(rho.matrix * o.matrix.T)
    if abs(value.imag) > TOLERANCE * max(1.0, abs(value.real)):
        raise StateError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def purity(rho: DensityOperator) -> float:
    """Tr(rho^2)."""
    m = rho.matrix
    return float(np.real(np.vdot(m.conj().T, m)))


def spectrum(rho: DensityOperator) -> np.ndarray:
    """Eigenvalues in ascending order."""
    return linalg.eigvalsh(rho.matrix)


def von_neumann_entropy(rho: DensityOperator) -> float:
    """-Tr(rho ln rho)."""
    eigenvalues = np.clip(spectrum(rho), 0.0, None)
    return float(np.sum(entr(eigenvalues)))
