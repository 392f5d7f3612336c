"""Central spin coupled to a bath of spins.

The default interaction is H_int = sum_k (g_k / 2) σz^S ⊗ σz^(k) with no
self-Hamiltonians and every bath spin starting in (|0> + |1>)/sqrt(2). For
a system prepared as c+|0> + c-|1> the reduced coherence then obeys

    |rho_01(t)| = |c+ c-| * prod_k | |a_k|^2 e^{-i g_k t} + |b_k|^2 e^{i g_k t} |

which is prod_k |cos(g_k t)| for equal-weight bath spins. The closed form is
exposed for comparison only; trajectories always come from exact evolution
of the closed system followed by a partial trace.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dynamics import Hamiltonian, evolve, evolve_many
from .reduction import partial_trace
from .states import (
    DensityOperator, Provenance, StateVector, expectation, product, proper_mixture,
    pure, purity,
)
from .tensor import (
    DimensionLimitError, LinOp, SpaceSpec, basis_projector, dimension_limit, reorder,
)

logger = logging.getLogger(__name__)

SYSTEM_LABEL = "S"
MAX_BATH_SIZE = 11
COUPLING_RANGE = (0.5, 1.5)
EQUAL_SUPERPOSITION = (1 / math.sqrt(2), 1 / math.sqrt(2))
REVIVAL_TOLERANCE = 1e-8
MIXTURE_TOLERANCE = 1e-12


class DecoherenceError(Exception):
    """Invalid bath model or trajectory request."""
    pass


def bath_label(k: int) -> str:
    return f"E{k + 1}"


def _z_signs(position: int, count: int) -> np.ndarray:
    """+1/-1 sigma_z eigenvalue of factor `position` across all composite indices."""
    return np.kron(np.ones(2 ** position),
                   np.kron(np.array([1.0, -1.0]), np.ones(2 ** (count - position - 1))))


@dataclass(frozen=True, eq=False)
class SpinBathModel:
    couplings: Tuple[float, ...]
    system_hamiltonian: LinOp
    bath_amplitudes: Tuple[complex, complex] = EQUAL_SUPERPOSITION
    hamiltonian: Hamiltonian = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.couplings)
        if not 1 <= n <= MAX_BATH_SIZE:
            raise DecoherenceError(f"bath size must be in 1..{MAX_BATH_SIZE}, got {n}")
        if not all(math.isfinite(g) for g in self.couplings):
            raise DecoherenceError(f"couplings must be finite, got {list(self.couplings)}")
        if 2 ** (n + 1) > dimension_limit():
            raise DimensionLimitError(
                f"bath of {n} spins needs dimension {2 ** (n + 1)} > {dimension_limit()}"
            )
        a, b = self.bath_amplitudes
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-10:
            raise DecoherenceError("bath spin amplitudes must be normalized")

        space = self.space
        system_space = space.subspace([SYSTEM_LABEL])
        h_s = reorder(self.system_hamiltonian.relabel(SYSTEM_LABEL), system_space)
        count = n + 1
        diagonal = np.zeros(space.dim)
        system_signs = _z_signs(0, count)
        for k, g in enumerate(self.couplings):
            diagonal += (g / 2) * system_signs * _z_signs(k + 1, count)
        h_int = LinOp(space, np.diag(diagonal))
        h1 = None if h_s.is_zero() else h_s
        ham = Hamiltonian(space, h1, None, h_int,
                          ((SYSTEM_LABEL,), tuple(self.bath_labels)))
        object.__setattr__(self, 'hamiltonian', ham)

    @property
    def bath_size(self) -> int:
        return len(self.couplings)

    @property
    def bath_labels(self) -> List[str]:
        return [bath_label(k) for k in range(self.bath_size)]

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec(((SYSTEM_LABEL, 2),) + tuple((label, 2) for label in self.bath_labels))

    @property
    def commensurate(self) -> bool:
        return max(self.couplings) - min(self.couplings) <= 1e-12


def build_spin_bath(bath_size: int, couplings: Optional[Sequence[float]] = None,
                    seed: Optional[int] = None,
                    system_hamiltonian: Optional[LinOp] = None,
                    bath_amplitudes: Tuple[complex, complex] = EQUAL_SUPERPOSITION
                    ) -> SpinBathModel:
    """Central-spin model; random couplings on [0.5, 1.5] need a seed."""
    if bath_size < 1:
        raise DecoherenceError(f"bath size must be at least 1, got {bath_size}")
    if 2 ** (bath_size + 1) > dimension_limit():
        raise DimensionLimitError(
            f"bath of {bath_size} spins needs dimension {2 ** (bath_size + 1)}"
        )
    if couplings is None:
        if seed is None:
            raise DecoherenceError("seed required for random couplings")
        rng = np.random.default_rng(seed)
        couplings = rng.uniform(COUPLING_RANGE[0], COUPLING_RANGE[1], bath_size).tolist()
    couplings = tuple(float(g) for g in couplings)
    if len(couplings) != bath_size:
        raise DecoherenceError(f"{len(couplings)} couplings for a bath of {bath_size}")
    if system_hamiltonian is None:
        system_hamiltonian = LinOp.zeros(SpaceSpec.single(SYSTEM_LABEL, 2))
    model = SpinBathModel(couplings, system_hamiltonian, tuple(bath_amplitudes))
    logger.info("spin bath: %d spins, dimension %d", bath_size, model.space.dim)
    return model


def system_state(amplitudes: Tuple[complex, complex]) -> StateVector:
    return StateVector(SpaceSpec.single(SYSTEM_LABEL, 2), np.asarray(amplitudes))


def bath_state(model: SpinBathModel) -> DensityOperator:
    """Initial product state of the bath spins."""
    amps = np.array([1.0 + 0j])
    for _ in range(model.bath_size):
        amps = np.kron(amps, np.asarray(model.bath_amplitudes, dtype=np.complex128))
    space = model.space.subspace(model.bath_labels)
    return pure(StateVector(space, amps))


def initial_state(model: SpinBathModel, amplitudes: Tuple[complex, complex]) -> DensityOperator:
    """(c+|0> + c-|1>) ⊗ bath spins, as a fundamental density operator."""
    return product(pure(system_state(amplitudes)), bath_state(model))


def coherence(rho: DensityOperator) -> float:
    """|<0|rho|1>| of a qubit state."""
    if rho.space.dim != 2:
        raise DecoherenceError(f"coherence needs a qubit state, got {rho.space}")
    return float(abs(rho.matrix[0, 1]))


@dataclass(frozen=True, eq=False)
class DecoherenceTrajectory:
    times: Tuple[float, ...]
    reduced_states: Tuple[DensityOperator, ...]
    offdiag_magnitudes: Tuple[float, ...]
    purity_series: Tuple[float, ...]
    full_purity_series: Tuple[float, ...]
    retained_label: str
    initial: DensityOperator

    def __post_init__(self):
        n = len(self.times)
        lengths = {len(self.reduced_states), len(self.offdiag_magnitudes),
                   len(self.purity_series), len(self.full_purity_series)}
        if lengths != {n}:
            raise DecoherenceError(f"trajectory series lengths differ: {sorted(lengths)} vs {n}")


def run_trajectory(model: SpinBathModel, amplitudes: Tuple[complex, complex],
                   times: Sequence[float], initial: Optional[DensityOperator] = None,
                   retained: str = SYSTEM_LABEL, workers: int = 1) -> DecoherenceTrajectory:
    """Evolve the closed system exactly and reduce onto the `retained` spin.

    `initial` overrides the product preparation built from `amplitudes`.
    Choosing another `retained` label re-splits the same closed system.
    """
    times = tuple(float(t) for t in times)
    if not times:
        raise DecoherenceError("trajectory needs at least one time")
    if any(b < a for a, b in zip(times, times[1:])):
        raise DecoherenceError("trajectory times must be sorted")
    rho0 = initial if initial is not None else initial_state(model, amplitudes)
    traced = model.space.complement([retained])
    states = evolve_many(rho0, model.hamiltonian, times, workers)
    reduced = tuple(partial_trace(rho, traced) for rho in states)
    logger.info("trajectory: %d samples, retained '%s'", len(times), retained)
    return DecoherenceTrajectory(
        times=times,
        reduced_states=reduced,
        offdiag_magnitudes=tuple(coherence(r) for r in reduced),
        purity_series=tuple(purity(r) for r in reduced),
        full_purity_series=tuple(purity(rho) for rho in states),
        retained_label=retained,
        initial=rho0,
    )


def closed_form_coherence(model: SpinBathModel, amplitudes: Tuple[complex, complex],
                          times: Sequence[float]) -> np.ndarray:
    """|rho_01(t)| of the central spin from the product-of-factors formula."""
    h_s = model.system_hamiltonian.matrix
    if abs(h_s[0, 1]) > 0 or abs(h_s[1, 0]) > 0:
        raise DecoherenceError("closed form needs a system Hamiltonian diagonal in σz")
    c_plus, c_minus = amplitudes
    a2 = abs(model.bath_amplitudes[0]) ** 2
    b2 = abs(model.bath_amplitudes[1]) ** 2
    t = np.asarray(times, dtype=np.float64)
    result = np.full(t.shape, abs(c_plus * np.conj(c_minus)))
    for g in model.couplings:
        result *= np.abs(a2 * np.exp(-1j * g * t) + b2 * np.exp(1j * g * t))
    return result


@dataclass(frozen=True)
class DecoherenceTime:
    time: Optional[float]
    threshold: float

    @property
    def reached(self) -> bool:
        return self.time is not None


def decoherence_time(trajectory: DecoherenceTrajectory,
                     threshold: float = 1 / math.e) -> DecoherenceTime:
    """First sampled time with |rho_01(t)| <= threshold * |rho_01(t_0)|."""
    if not trajectory.times:
        raise DecoherenceError("empty trajectory")
    start = trajectory.offdiag_magnitudes[0]
    if start <= 0:
        raise DecoherenceError("initial coherence is zero")
    for t, value in zip(trajectory.times, trajectory.offdiag_magnitudes):
        if value <= threshold * start:
            return DecoherenceTime(t, threshold)
    return DecoherenceTime(None, threshold)


@dataclass(frozen=True)
class RecoherenceReport:
    revival_time: float
    initial_coherence: float
    revived_coherence: float
    revived: bool
    decohered_time: float
    mixture_distance: float
    mixture_max_coherence: float

    @property
    def mixture_revives(self) -> bool:
        return self.mixture_max_coherence >= MIXTURE_TOLERANCE

    @property
    def discriminates(self) -> bool:
        """Improper mixture revives while the matrix-equal proper one does not."""
        return self.revived and not self.mixture_revives


def recoherence_check(model: SpinBathModel,
                      trajectory: DecoherenceTrajectory) -> RecoherenceReport:
    """Check the coherence revival at t = pi/g and contrast it with a proper mixture.

    The proper mixture has the matrix of the decohered reduced state at
    t = pi/(2g); it is evolved as mixture ⊗ (initial bath) under the same
    Hamiltonian over the trajectory's times and the revival time.
    """
    if not model.commensurate:
        raise DecoherenceError(f"couplings are not commensurate: {list(model.couplings)}")
    if trajectory.retained_label != SYSTEM_LABEL:
        raise DecoherenceError("recoherence is checked on the central spin")
    g = abs(model.couplings[0])
    traced = model.bath_labels
    rho0 = trajectory.initial
    c0 = coherence(partial_trace(rho0, traced))
    if g == 0:
        revival_time = decohered_time = 0.0
    else:
        revival_time = math.pi / g
        decohered_time = math.pi / (2 * g)
    c_rev = coherence(partial_trace(evolve(rho0, model.hamiltonian, revival_time), traced))
    decohered = partial_trace(evolve(rho0, model.hamiltonian, decohered_time), traced)

    weights = np.clip(np.real(np.diag(decohered.matrix)), 0.0, None)
    weights = weights / weights.sum()
    system_space = decohered.space
    components = [DensityOperator(basis_projector(system_space, i)) for i in range(2)]
    mixture = proper_mixture(weights, components)
    mixture_distance = float(np.linalg.norm(mixture.matrix - decohered.matrix))
    comparison = product(mixture, bath_state(model), Provenance.PROPER_MIXTURE)
    samples = list(trajectory.times) + [revival_time]
    mixture_max = max(
        coherence(partial_trace(rho, traced))
        for rho in evolve_many(comparison, model.hamiltonian, samples)
    )
    revived = abs(c_rev - c0) < REVIVAL_TOLERANCE
    logger.info("recoherence: |rho01| %.6f -> %.6f at t=%.6f, mixture max %.3e",
                c0, c_rev, revival_time, mixture_max)
    return RecoherenceReport(revival_time, c0, c_rev, revived, decohered_time,
                             mixture_distance, mixture_max)


@dataclass(frozen=True)
class ObservableConvergence:
    name: str
    initial_value: float
    late_mean: float
    fluctuation: float
    scale: float
    converged: bool


def expectation_convergence(trajectory: DecoherenceTrajectory,
                            observables: Mapping[str, LinOp],
                            window: float = 0.5,
                            epsilon: float = 0.05) -> List[ObservableConvergence]:
    """Late-window mean and fluctuation of retained-spin expectation values.

    The window is the last `window` fraction of samples. The fluctuation is
    the mean absolute deviation from the late mean; an observable converges
    when it is below `epsilon` times the observable's spectral radius.
    """
    n = len(trajectory.times)
    start = int(math.floor(n * (1.0 - window)))
    if not 0 < window <= 1 or start >= n:
        raise DecoherenceError(f"late window of fraction {window} over {n} samples is empty")
    report = []
    for name, observable in observables.items():
        if len(observable.space.factors) == 1:
            observable = observable.relabel(trajectory.retained_label)
        values = np.array([expectation(rho, observable) for rho in trajectory.reduced_states])
        late = values[start:]
        late_mean = float(np.mean(late))
        fluctuation = float(np.mean(np.abs(late - late_mean)))
        scale = float(np.max(np.abs(np.linalg.eigvalsh(observable.matrix))))
        converged = fluctuation <= epsilon * scale if scale > 0 else True
        report.append(ObservableConvergence(name, float(values[0]), late_mean,
                                            fluctuation, scale, converged))
    return report
