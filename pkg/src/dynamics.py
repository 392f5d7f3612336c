"""Hamiltonians with an explicit interaction term and exact unitary propagation.

Propagators come from the Hermitian eigendecomposition H = V diag(E) V†,
so U(t) = V diag(exp(-i E t / hbar)) V† is unitary to rounding for every t.
hbar defaults to 1 and times are dimensionless.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .states import DensityOperator
from .tensor import (
    TOLERANCE, LinOp, SpaceError, SpaceSpec, embed_subsystem, frobenius_distance,
)

logger = logging.getLogger(__name__)


class DynamicsError(Exception):
    """Malformed Hamiltonian or propagation request."""
    pass


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """H = H1 ⊗ I2 + I1 ⊗ H2 + H_int on a two-part partition of `space`.

    h1 lives on the factors of partition[0], h2 on those of partition[1]
    (None means zero); h_int acts on the whole space.
    """
    space: SpaceSpec
    h1: Optional[LinOp]
    h2: Optional[LinOp]
    h_int: LinOp
    partition: Tuple[Tuple[str, ...], Tuple[str, ...]]
    total: LinOp = field(init=False, repr=False)

    def __post_init__(self):
        first, second = (tuple(part) for part in self.partition)
        object.__setattr__(self, 'partition', (first, second))
        if set(first) & set(second):
            raise DynamicsError(f"partition parts overlap: {first} / {second}")
        if sorted(first + second) != sorted(self.space.labels):
            raise DynamicsError(
                f"partition {first} / {second} does not cover {self.space}"
            )
        if not first:
            raise DynamicsError("first partition part is empty")

        total = self.h_int
        if total.space != self.space:
            raise SpaceError(f"h_int lives on {total.space}, expected {self.space}")
        for name, part, labels in (("h1", self.h1, first), ("h2", self.h2, second)):
            if part is None:
                continue
            if sorted(part.space.labels) != sorted(labels):
                raise DynamicsError(
                    f"{name} lives on {part.space}, expected factors {labels}"
                )
            if not part.is_hermitian():
                raise DynamicsError(f"{name} is not Hermitian")
            total = total + embed_subsystem(part, self.space)
        if not self.h_int.is_hermitian():
            raise DynamicsError("h_int is not Hermitian")
        object.__setattr__(self, 'total', total)

    @classmethod
    def build(cls, space: SpaceSpec, first: Sequence[str],
              h1: Optional[LinOp] = None, h2: Optional[LinOp] = None,
              h_int: Optional[LinOp] = None) -> 'Hamiltonian':
        """Assemble from parts; the second part is the complement of `first`."""
        second = space.complement(first)
        if h_int is None:
            h_int = LinOp.zeros(space)
        return cls(space, h1, h2, h_int, (tuple(first), second))

    @classmethod
    def local(cls, generator: LinOp) -> 'Hamiltonian':
        """A Hamiltonian whose only part is `generator` on its whole space."""
        return cls.build(generator.space, generator.space.labels, h1=generator)

    @property
    def interacting(self) -> bool:
        return not self.h_int.is_zero()


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigendecomposition of an assembled Hamiltonian."""
    space: SpaceSpec
    energies: np.ndarray
    vectors: np.ndarray
    hbar: float = 1.0

    def phases(self, t: float) -> np.ndarray:
        return np.exp(-1j * self.energies * t / self.hbar)

    def propagator(self, t: float) -> LinOp:
        v = self.vectors
        return LinOp(self.space, (v * self.phases(t)) @ v.conj().T)

    def to_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ matrix @ self.vectors

    def evolve_eigenbasis(self, rotated: np.ndarray, t: float) -> np.ndarray:
        """U rho U† given rho already expressed in the eigenbasis."""
        p = self.phases(t)
        m = self.vectors @ (rotated * np.outer(p, p.conj())) @ self.vectors.conj().T
        return (m + m.conj().T) / 2


def spectrum_of(h: Hamiltonian, hbar: float = 1.0) -> Spectrum:
    logger.debug("diagonalizing Hamiltonian on %s (dim %d)", h.space, h.space.dim)
    energies, vectors = linalg.eigh(h.total.matrix)
    return Spectrum(h.space, energies, vectors, hbar)


def propagator(h: Hamiltonian, t: float, hbar: float = 1.0) -> LinOp:
    """U_t = exp(-i H t / hbar)."""
    return spectrum_of(h, hbar).propagator(t)


def local_propagator(generator: LinOp, t: float, hbar: float = 1.0) -> LinOp:
    """exp(-i G t / hbar) for a Hermitian generator on its own space."""
    if not generator.is_hermitian():
        raise DynamicsError("generator is not Hermitian")
    energies, vectors = linalg.eigh(generator.matrix)
    return Spectrum(generator.space, energies, vectors, hbar).propagator(t)


def _check_space(rho: DensityOperator, h: Hamiltonian) -> None:
    if rho.space != h.space:
        raise SpaceError(f"state on {rho.space}, Hamiltonian on {h.space}")


def evolve(rho: DensityOperator, h: Hamiltonian, t: float) -> DensityOperator:
    """U rho U†; provenance is kept."""
    _check_space(rho, h)
    eig = spectrum_of(h)
    m = eig.evolve_eigenbasis(eig.to_eigenbasis(rho.matrix), t)
    return DensityOperator(LinOp(rho.space, m), rho.provenance)


def evolve_many(rho: DensityOperator, h: Hamiltonian, times: Sequence[float],
                workers: int = 1) -> List[DensityOperator]:
    """Evolve one initial state to each of `times`, results in time order."""
    _check_space(rho, h)
    eig = spectrum_of(h)
    rotated = eig.to_eigenbasis(rho.matrix)

    def sample(t: float) -> DensityOperator:
        m = eig.evolve_eigenbasis(rotated, t)
        return DensityOperator(LinOp(rho.space, m), rho.provenance)

    logger.debug("evolving %d samples with %d worker(s)", len(times), workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(sample, times))
    return [sample(t) for t in times]


@dataclass(frozen=True)
class FactorizationResult:
    holds: bool
    residual: float


def factorization_check(h: Hamiltonian, t: float) -> FactorizationResult:
    """Compare exp(-iHt) with exp(-iH1 t) exp(-iH2 t), both on the full space."""
    full = propagator(h, t)
    product = LinOp.identity(h.space)
    for part in (h.h1, h.h2):
        if part is not None:
            product = product @ embed_subsystem(local_propagator(part, t), h.space)
    residual = frobenius_distance(full, product)
    return FactorizationResult(not h.interacting and residual < TOLERANCE, residual)


def evolve_reduced_noninteracting(rho_r: DensityOperator, h_local: LinOp,
                                  t: float) -> DensityOperator:
    """exp(-iH1 t) rho_r exp(iH1 t) on the subsystem's own space."""
    if rho_r.space != h_local.space:
        raise SpaceError(f"state on {rho_r.space}, generator on {h_local.space}")
    u = local_propagator(h_local, t).matrix
    m = u @ rho_r.matrix @ u.conj().T
    return DensityOperator(LinOp(rho_r.space, (m + m.conj().T) / 2), rho_r.provenance)
