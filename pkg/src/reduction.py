"""Partial traces, the defining property of reduced states, and the
coarse-graining projector Pi(rho) = Tr_2(rho) ⊗ I_2/d_2.

Partial traces are computed by index arithmetic on the row-major composite
index (a trace over each traced factor in place); factors are never
permuted first, so traced labels may sit anywhere in the space.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .dynamics import Hamiltonian, evolve_many
from .states import DensityOperator, Provenance, expectation, spectrum
from .tensor import (
    LinOp, SpaceSpec, embed_subsystem, frobenius_distance, reorder, tensor_product,
)

logger = logging.getLogger(__name__)

# Pi is materialized as a d^2 x d^2 matrix only up to this total dimension.
PROJECTOR_MATRIX_LIMIT = 36


class ReductionError(Exception):
    """Invalid traced set or oversized superoperator request."""
    pass


def _traced_set(space: SpaceSpec, traced: Iterable[str]) -> Tuple[str, ...]:
    labels = tuple(traced)
    if not labels:
        raise ReductionError("traced label set is empty")
    unknown = [label for label in labels if not space.has(label)]
    if unknown:
        raise ReductionError(f"unknown labels {unknown} for {space}")
    if set(labels) >= set(space.labels):
        raise ReductionError(f"cannot trace out every factor of {space}")
    return tuple(label for label in space.labels if label in set(labels))


def trace_out(op: LinOp, traced: Iterable[str]) -> LinOp:
    """Linear partial trace of an arbitrary operator over `traced`."""
    space = op.space
    gone = set(traced)
    dims = list(space.dims)
    m = op.matrix
    # one factor at a time, last first, so earlier positions stay valid
    for k in reversed(range(len(dims))):
        if space.labels[k] not in gone:
            continue
        left = int(np.prod(dims[:k], dtype=np.int64))
        right = int(np.prod(dims[k + 1:], dtype=np.int64))
        d = dims.pop(k)
        block = m.reshape(left, d, right, left, d, right)
        m = np.trace(block, axis1=1, axis2=4).reshape(left * right, left * right)
    retained = space.subspace(label for label in space.labels if label not in gone)
    return LinOp(retained, m)


def partial_trace(rho: DensityOperator, traced: Iterable[str]) -> DensityOperator:
    """Reduced state on the factors not in `traced`."""
    labels = _traced_set(rho.space, traced)
    op = trace_out(rho.op, labels)
    m = op.matrix
    return DensityOperator(LinOp(op.space, (m + m.conj().T) / 2), Provenance.REDUCED)


def local_observable_basis(space: SpaceSpec) -> List[LinOp]:
    """Complete Hermitian operator basis of size d^2.

    Diagonal projectors |j><j| plus, for j < k, |j><k| + |k><j| and
    -i(|j><k| - |k><j|). For a qubit this is {|0><0|, |1><1|, X, Y}.
    """
    d = space.dim
    basis = []
    for j in range(d):
        m = np.zeros((d, d), dtype=np.complex128)
        m[j, j] = 1.0
        basis.append(LinOp(space, m))
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=np.complex128)
            sym[j, k] = sym[k, j] = 1.0
            anti = np.zeros((d, d), dtype=np.complex128)
            anti[j, k] = -1j
            anti[k, j] = 1j
            basis.append(LinOp(space, sym))
            basis.append(LinOp(space, anti))
    return basis


def verify_reduced_definition(rho: DensityOperator, rho_r: DensityOperator,
                              retained: Iterable[str]) -> float:
    """Max |<O1 ⊗ I>_rho - <O1>_rho_r| over a complete basis of local observables."""
    retained = tuple(retained)
    expected = rho.space.subspace(retained)
    if sorted(rho_r.space.factors) != sorted(expected.factors):
        raise ReductionError(
            f"reduced state lives on {rho_r.space}, expected factors of {expected}"
        )
    residual = 0.0
    for o1 in local_observable_basis(rho_r.space):
        whole = expectation(rho, embed_subsystem(o1, rho.space))
        part = expectation(rho_r, o1)
        residual = max(residual, abs(whole - part))
    return residual


def normalized_identity(space: SpaceSpec) -> LinOp:
    """The normalized identity I/d on `space`."""
    return LinOp(space, np.eye(space.dim) / space.dim)


@dataclass(frozen=True, eq=False)
class CoarseGrainedState:
    """rho_cg = rho_1^r ⊗ I_2/d_2 on the full space.

    `reduced` and `normalized_identity` are the two factors the state was
    built from; they are kept so the construction stays inspectable.
    """
    rho_cg: DensityOperator
    traced_labels: Tuple[str, ...]
    reduced: DensityOperator
    normalized_identity: LinOp


def _lift(reduced: LinOp, delta: LinOp, space: SpaceSpec) -> LinOp:
    return reorder(tensor_product(reduced, delta), space)


def coarse_grain(rho: DensityOperator, traced: Iterable[str]) -> CoarseGrainedState:
    """Pi(rho) = (Tr_traced rho) ⊗ I/d on the full space."""
    labels = _traced_set(rho.space, traced)
    reduced = partial_trace(rho, labels)
    delta = normalized_identity(rho.space.subspace(labels))
    rho_cg = DensityOperator(_lift(reduced.op, delta, rho.space), Provenance.COARSE_GRAINED)
    return CoarseGrainedState(rho_cg, labels, reduced, delta)


def apply_projector(op: LinOp, traced: Iterable[str]) -> LinOp:
    """Linear action of Pi on an arbitrary operator."""
    labels = _traced_set(op.space, traced)
    delta = normalized_identity(op.space.subspace(labels))
    return _lift(trace_out(op, labels), delta, op.space)


def projector_matrix(space: SpaceSpec, traced: Iterable[str]) -> np.ndarray:
    """Pi as a d^2 x d^2 matrix acting on row-major vectorized operators."""
    d = space.dim
    if d > PROJECTOR_MATRIX_LIMIT:
        raise ReductionError(
            f"superoperator materialization limited to dim {PROJECTOR_MATRIX_LIMIT}, got {d}"
        )
    labels = _traced_set(space, traced)
    columns = []
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=np.complex128)
            e[a, b] = 1.0
            columns.append(apply_projector(LinOp(space, e), labels).matrix.reshape(-1))
    return np.stack(columns, axis=1)


def recover_reduced(cg: CoarseGrainedState) -> DensityOperator:
    """Trace the coarse-grained state back down to the reduced state."""
    return partial_trace(cg.rho_cg, cg.traced_labels)


def coarse_grained_expectation_check(rho: DensityOperator, o1: LinOp,
                                     traced: Iterable[str]) -> float:
    """|<O1 ⊗ I>_{Pi rho} - <O1>_{rho_1^r}| for a local observable O1."""
    cg = coarse_grain(rho, traced)
    local = embed_subsystem(o1, cg.reduced.space)
    whole = expectation(cg.rho_cg, embed_subsystem(o1, rho.space))
    return abs(whole - expectation(cg.reduced, local))


def correlation_gap(rho: DensityOperator, o: LinOp, traced: Iterable[str]) -> float:
    """<O>_rho - <O>_{Pi rho}; nonzero only when O sees the cancelled correlations."""
    cg = coarse_grain(rho, traced)
    return expectation(rho, o) - expectation(cg.rho_cg, o)


def coarse_grained_trajectory(rho0: DensityOperator, h: Hamiltonian,
                              times: Sequence[float], traced: Iterable[str],
                              workers: int = 1) -> List[CoarseGrainedState]:
    """Pi applied to the exactly evolved state at each time."""
    labels = _traced_set(rho0.space, traced)
    logger.info("coarse-grained trajectory over %d times, tracing %s", len(times), labels)
    return [coarse_grain(rho_t, labels) for rho_t in evolve_many(rho0, h, times, workers)]


def product_of_marginals(rho: DensityOperator, first: Iterable[str]) -> DensityOperator:
    """rho_1^r ⊗ rho_2^r in the ordering of rho's space."""
    first = tuple(first)
    second = rho.space.complement(first)
    rho1 = partial_trace(rho, second)
    rho2 = partial_trace(rho, first)
    return DensityOperator(reorder(tensor_product(rho1.op, rho2.op), rho.space),
                           Provenance.REDUCED)


def marginal_reconstruction_gap(rho: DensityOperator, first: Iterable[str]) -> float:
    """Distance between rho and the product of its two reduced states."""
    return frobenius_distance(rho.op, product_of_marginals(rho, first).op)


def reduced_spectrum(rho: DensityOperator, retained: Iterable[str]) -> np.ndarray:
    """Spectrum of the reduced state on `retained` for this choice of partition."""
    return spectrum(partial_trace(rho, rho.space.complement(retained)))
