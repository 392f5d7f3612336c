"""Collapse-free von Neumann measurement chains.

Each premeasurement appends a pointer factor in its ready state and applies
U = sum_i P_i ⊗ T_i, where P_i projects the system onto eigenvector i and
T_i swaps the pointer's ready level with outcome level i. The chain state
stays a pure state of system + pointers; probabilities of pointer readings
(and of conjunctions of readings on different pointers) are computed from
that state alone.

`reduced_chain_predictor` implements the other pipeline on purpose: it
treats the reduced state of the system after one measurement as if it were
the system's state, feeds it into a fresh premeasurement and multiplies the
resulting pointer marginals. Its joint table loses the correlations the full
chain keeps.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .reduction import partial_trace
from .states import DensityOperator, StateVector, pure
from .tensor import (
    TOLERANCE, LinOp, SpaceError, SpaceSpec, basis_projector, commutator, embed,
    embed_subsystem, frobenius_distance, reorder,
)

logger = logging.getLogger(__name__)

# Conditioning events at or below this probability are treated as impossible.
ZERO_PROBABILITY = 1e-14
COMMUTATOR_TOLERANCE = 1e-12

Event = Tuple[str, int]


class MeasurementError(Exception):
    """Malformed premeasurement or probability query."""
    pass


class ZeroProbabilityError(MeasurementError):
    """Conditioning on an event of probability zero."""
    pass


@dataclass(frozen=True)
class PointerFactor:
    """Pointer degree of freedom: a ready level plus one level per outcome."""
    label: str
    dim: int
    ready_index: int
    outcome_indices: Tuple[int, ...]

    def __post_init__(self):
        outcomes = tuple(int(i) for i in self.outcome_indices)
        object.__setattr__(self, 'outcome_indices', outcomes)
        if len(set(outcomes)) != len(outcomes):
            raise MeasurementError(f"pointer '{self.label}' repeats an outcome level")
        if self.ready_index in outcomes:
            raise MeasurementError(
                f"pointer '{self.label}' ready level {self.ready_index} is also an outcome level"
            )
        if self.dim < 1 + len(outcomes):
            raise MeasurementError(
                f"pointer '{self.label}' has dim {self.dim} < 1 + {len(outcomes)} outcomes"
            )
        for index in (self.ready_index,) + outcomes:
            if not 0 <= index < self.dim:
                raise MeasurementError(f"pointer level {index} outside dim {self.dim}")

    @classmethod
    def standard(cls, label: str, outcomes: int) -> 'PointerFactor':
        """Ready level 0, outcome i at level i + 1."""
        return cls(label, outcomes + 1, 0, tuple(range(1, outcomes + 1)))

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec.single(self.label, self.dim)

    def ready_state(self) -> StateVector:
        return StateVector.basis(self.space, self.ready_index)

    def transposition(self, outcome: int) -> LinOp:
        """Swap of the ready level with the level of `outcome`."""
        perm = np.eye(self.dim, dtype=np.complex128)
        r, o = self.ready_index, self.outcome_indices[outcome]
        perm[[r, o]] = perm[[o, r]]
        return LinOp(self.space, perm)


@dataclass(frozen=True, eq=False)
class MeasurementStep:
    observable: LinOp
    eigenvalues: np.ndarray
    eigenbasis: np.ndarray
    pointer: PointerFactor


@dataclass(frozen=True, eq=False)
class MeasurementChain:
    """System + attached pointers, with the premeasurements applied so far."""
    system_space: SpaceSpec
    steps: Tuple[MeasurementStep, ...]
    state: StateVector

    @classmethod
    def start(cls, initial: StateVector) -> 'MeasurementChain':
        return cls(initial.space, (), initial)

    @property
    def space(self) -> SpaceSpec:
        return self.state.space

    @property
    def pointer_labels(self) -> Tuple[str, ...]:
        return tuple(step.pointer.label for step in self.steps)

    def step_for(self, label: str) -> MeasurementStep:
        for step in self.steps:
            if step.pointer.label == label:
                return step
        raise MeasurementError(f"no pointer labelled '{label}' in the chain")


def _as_basis(eigenbasis: Union[np.ndarray, Sequence[np.ndarray]], dim: int) -> np.ndarray:
    """Columns of an orthonormal basis, validated."""
    if isinstance(eigenbasis, np.ndarray) and eigenbasis.ndim == 2:
        basis = np.array(eigenbasis, dtype=np.complex128)
    else:
        basis = np.stack([np.asarray(v, dtype=np.complex128).reshape(-1)
                          for v in eigenbasis], axis=1)
    if basis.shape != (dim, dim):
        raise MeasurementError(
            f"eigenbasis of shape {basis.shape} does not span a space of dim {dim}"
        )
    gram = basis.conj().T @ basis
    residual = float(np.linalg.norm(gram - np.eye(dim)))
    if residual >= TOLERANCE:
        raise MeasurementError(f"eigenbasis is not orthonormal (residual {residual:.3e})")
    return basis


def eigenbasis_of(observable: LinOp) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvector columns of a nondegenerate observable."""
    if not observable.is_hermitian():
        raise MeasurementError("observable is not Hermitian")
    values, vectors = linalg.eigh(observable.matrix)
    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]
    if len(values) > 1 and np.min(np.abs(np.diff(values))) < 1e-8:
        raise MeasurementError("degenerate observables are not supported")
    return values, vectors


def spin_z_basis() -> np.ndarray:
    """Columns |z+>, |z->."""
    return np.eye(2, dtype=np.complex128)


def spin_basis_rotation(z_basis: Union[np.ndarray, Sequence[np.ndarray]]) -> np.ndarray:
    """|x±> = (|z+> ± |z->)/sqrt(2), returned as columns."""
    z = _as_basis(z_basis, 2)
    plus, minus = z[:, 0], z[:, 1]
    return np.stack([(plus + minus) / np.sqrt(2), (plus - minus) / np.sqrt(2)], axis=1)


def basis_coefficients(vector: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Expansion coefficients <b_i|v> of a vector in an orthonormal basis."""
    return basis.conj().T @ np.asarray(vector, dtype=np.complex128).reshape(-1)


def coupling_unitary(space: SpaceSpec, system_space: SpaceSpec,
                     eigenbasis: np.ndarray, pointer: PointerFactor) -> LinOp:
    """U = sum_i P_i ⊗ T_i on `space`, which holds the system and the pointer."""
    if len(pointer.outcome_indices) != eigenbasis.shape[1]:
        raise MeasurementError(
            f"pointer '{pointer.label}' maps {len(pointer.outcome_indices)} outcomes, "
            f"eigenbasis has {eigenbasis.shape[1]} vectors"
        )
    total = np.zeros((space.dim, space.dim), dtype=np.complex128)
    for i in range(eigenbasis.shape[1]):
        v = eigenbasis[:, i]
        p_i = embed_subsystem(LinOp(system_space, np.outer(v, v.conj())), space)
        t_i = embed(pointer.transposition(i), space, pointer.label)
        total += (p_i @ t_i).matrix
    return LinOp(space, total)


def _prepare(system_space: SpaceSpec, observable: LinOp,
             eigenbasis, pointer: Optional[PointerFactor],
             default_label: str) -> Tuple[LinOp, np.ndarray, np.ndarray, PointerFactor]:
    if sorted(observable.space.factors) != sorted(system_space.factors):
        raise SpaceError(f"observable on {observable.space}, system is {system_space}")
    observable = reorder(observable, system_space)
    if eigenbasis is None:
        eigenvalues, basis = eigenbasis_of(observable)
    else:
        basis = _as_basis(eigenbasis, system_space.dim)
        eigenvalues = np.real(np.diag(basis.conj().T @ observable.matrix @ basis))
    if pointer is None:
        pointer = PointerFactor.standard(default_label, basis.shape[1])
    return observable, eigenvalues, basis, pointer


def premeasure(chain: MeasurementChain, observable: LinOp,
               eigenbasis=None, pointer: Optional[PointerFactor] = None) -> MeasurementChain:
    """Attach a ready pointer and correlate it with the observable's eigenbasis."""
    observable, eigenvalues, basis, pointer = _prepare(
        chain.system_space, observable, eigenbasis, pointer, f"P{len(chain.steps) + 1}"
    )
    if chain.space.has(pointer.label):
        raise MeasurementError(f"pointer label '{pointer.label}' is already in use")
    space = chain.space.concat(pointer.space)
    ready = np.kron(chain.state.amplitudes, pointer.ready_state().amplitudes)
    u = coupling_unitary(space, chain.system_space, basis, pointer)
    state = StateVector(space, u.matrix @ ready)
    logger.debug("premeasured with pointer '%s' on %s", pointer.label, space)
    step = MeasurementStep(observable, eigenvalues, basis, pointer)
    return MeasurementChain(chain.system_space, chain.steps + (step,), state)


def premeasure_density(rho: DensityOperator, system_space: SpaceSpec,
                       eigenbasis, pointer: PointerFactor) -> DensityOperator:
    """The same coupling applied to rho ⊗ |ready><ready|; provenance is kept."""
    basis = _as_basis(eigenbasis, system_space.dim)
    space = rho.space.concat(pointer.space)
    ready = pointer.ready_state().amplitudes
    start = np.kron(rho.matrix, np.outer(ready, ready.conj()))
    u = coupling_unitary(space, system_space, basis, pointer).matrix
    return DensityOperator(LinOp(space, u @ start @ u.conj().T), rho.provenance)


def _event_projector(chain: MeasurementChain, event: Event) -> LinOp:
    label, outcome = event
    pointer = chain.step_for(label).pointer
    if not 0 <= outcome < len(pointer.outcome_indices):
        raise MeasurementError(f"pointer '{label}' has no outcome {outcome}")
    local = basis_projector(pointer.space, pointer.outcome_indices[outcome])
    return embed(local, chain.space, label)


def joint_probability(chain: MeasurementChain, events: Sequence[Event]) -> float:
    """||(prod of event projectors)|Psi>||^2 for readings on distinct pointers."""
    projectors = [_event_projector(chain, event) for event in events]
    for i in range(len(projectors)):
        for j in range(i + 1, len(projectors)):
            gap = float(np.linalg.norm(commutator(projectors[i], projectors[j]).matrix))
            if gap >= COMMUTATOR_TOLERANCE:
                raise MeasurementError(
                    f"pointer projectors for {events[i]} and {events[j]} do not commute"
                )
    # Pointer projectors are diagonal 0/1 matrices, so their product is an
    # exact elementwise mask and the result is independent of event order.
    mask = np.ones(chain.space.dim)
    for p in projectors:
        mask = mask * np.real(np.diag(p.matrix))
    return float(np.sum(mask * np.abs(chain.state.amplitudes) ** 2))


def conditional_probability(chain: MeasurementChain, target: Event,
                            given: Sequence[Event]) -> float:
    """pr(target | given) = pr(target ∧ given) / pr(given)."""
    given = list(given)
    marginal = joint_probability(chain, given)
    if marginal <= ZERO_PROBABILITY:
        raise ZeroProbabilityError(f"conditioning event {given} has probability {marginal:.3e}")
    joint = joint_probability(chain, given + [target])
    return float(min(1.0, max(0.0, joint / marginal)))


def outcome_distribution(chain: MeasurementChain, labels: Sequence[str]) -> np.ndarray:
    """Joint probability table indexed by the outcome of each named pointer."""
    shape = tuple(len(chain.step_for(label).pointer.outcome_indices) for label in labels)
    table = np.zeros(shape)
    for outcomes in np.ndindex(*shape):
        table[outcomes] = joint_probability(chain, list(zip(labels, outcomes)))
    return table


def system_reduced_state(chain: MeasurementChain) -> DensityOperator:
    """Reduced state of the measured system (pointers traced out)."""
    if not chain.steps:
        return pure(chain.state)
    return partial_trace(pure(chain.state), chain.pointer_labels)


def pointer_reduced_state(chain: MeasurementChain, label: str) -> DensityOperator:
    """Reduced state of one pointer (everything else traced out)."""
    chain.step_for(label)
    return partial_trace(pure(chain.state), chain.space.complement([label]))


@dataclass(frozen=True, eq=False)
class ReducedChainPrediction:
    """Joint tables for (first outcome, second outcome) from both pipelines."""
    first_label: str
    second_label: str
    flawed: np.ndarray
    true: np.ndarray
    max_discrepancy: float
    disagrees: bool

    @property
    def flawed_marginals(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.flawed.sum(axis=1), self.flawed.sum(axis=0)

    @property
    def true_marginals(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.true.sum(axis=1), self.true.sum(axis=0)


def _pointer_distribution(rho_pointer: DensityOperator, pointer: PointerFactor) -> np.ndarray:
    diag = np.real(np.diag(rho_pointer.matrix))
    return np.array([diag[i] for i in pointer.outcome_indices])


def reduced_chain_predictor(chain: MeasurementChain, observable: Optional[LinOp] = None,
                            eigenbasis=None, label: Optional[str] = None,
                            tolerance: float = TOLERANCE) -> ReducedChainPrediction:
    """Predict consecutive readings as if the reduced system state were the state.

    The most recent step is the first measurement. The second measurement
    defaults to the same observable and eigenbasis. The flawed table is the
    product of the first pointer's reduced distribution and the distribution
    a fresh pointer acquires when premeasuring the reduced system state; the
    true table comes from premeasuring the actual chain.
    """
    if not chain.steps:
        raise MeasurementError("reduced-state prediction needs a completed measurement")
    first = chain.steps[-1]
    if observable is None:
        observable = first.observable
        if eigenbasis is None:
            eigenbasis = first.eigenbasis
    observable, _, basis, second = _prepare(
        chain.system_space, observable, eigenbasis, None,
        label or f"P{len(chain.steps) + 1}",
    )
    if chain.space.has(second.label):
        raise MeasurementError(f"pointer label '{second.label}' is already in use")

    rho_s = system_reduced_state(chain)
    p_first = _pointer_distribution(pointer_reduced_state(chain, first.pointer.label),
                                    first.pointer)
    rho_2 = premeasure_density(rho_s, chain.system_space, basis, second)
    rho_pointer = partial_trace(rho_2, chain.system_space.labels)
    p_second = _pointer_distribution(rho_pointer, second)
    flawed = np.outer(p_first, p_second)

    true_chain = premeasure(chain, observable, basis, second)
    true = outcome_distribution(true_chain, [first.pointer.label, second.label])
    discrepancy = float(np.max(np.abs(flawed - true)))
    logger.info("reduced-state predictor: max discrepancy %.3e", discrepancy)
    return ReducedChainPrediction(first.pointer.label, second.label, flawed, true,
                                  discrepancy, discrepancy > tolerance)


def coupling_unitarity_residual(u: LinOp) -> float:
    """||U U† - I||_F."""
    return frobenius_distance(u @ u.dag(), LinOp.identity(u.space))
