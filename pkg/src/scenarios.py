"""Named scenarios: each builds its systems, runs the library operations and
collects result tables plus the invariant checks executed along the way."""

import logging
from typing import Callable, Dict, List, Tuple

import numpy as np

from .classical import (
    EQUILIBRIUM_THRESHOLD, CellPartition, DensityField, coarse_grain_classical,
    equilibrium_approach,
)
from .config import ScenarioConfig
from .decoherence import (
    MIXTURE_TOLERANCE, REVIVAL_TOLERANCE, SYSTEM_LABEL, build_spin_bath,
    closed_form_coherence, decoherence_time, expectation_convergence,
    recoherence_check, run_trajectory,
)
from .dynamics import (
    Hamiltonian, evolve_many, evolve_reduced_noninteracting, factorization_check,
)
from .measurement import (
    MeasurementChain, ZERO_PROBABILITY, conditional_probability, coupling_unitary,
    coupling_unitarity_residual, joint_probability, outcome_distribution,
    pointer_reduced_state, premeasure, reduced_chain_predictor, spin_basis_rotation,
    spin_z_basis,
)
from .reduction import (
    PROJECTOR_MATRIX_LIMIT, apply_projector, coarse_grain,
    coarse_grained_expectation_check, coarse_grained_trajectory, correlation_gap,
    local_observable_basis, partial_trace, projector_matrix, recover_reduced,
    verify_reduced_definition,
)
from .report import ScenarioReport, check_above, check_below
from .sampling import random_density, random_hermitian
from .states import Provenance, StateVector, purity, spectrum, von_neumann_entropy
from .tensor import LinOp, SpaceSpec, frobenius_distance, pauli, tensor_product

logger = logging.getLogger(__name__)

OUTCOME_SIGNS = ("+", "-")
FACTORIZATION_GAP = 1e-3


class ScenarioError(Exception):
    """Scenario parameters the library cannot act on."""
    pass


def _bipartite(dims) -> SpaceSpec:
    if len(dims) != 2 or min(dims) < 1:
        raise ScenarioError(f"dims must be two positive integers, got {list(dims)}")
    return SpaceSpec.of(("A", dims[0]), ("B", dims[1]))


def _qubit(amplitudes) -> StateVector:
    return StateVector(SpaceSpec.single(SYSTEM_LABEL, 2), np.asarray(amplitudes))


def run_consecutive(config: ScenarioConfig, report: ScenarioReport) -> None:
    """sigma_z followed by sigma_x (or sigma_z again), probabilities from the chain."""
    amplitudes = config.parameters["amplitudes"]
    second = config.parameters["second"]
    z = spin_z_basis()
    chain = premeasure(MeasurementChain.start(_qubit(amplitudes)), pauli("z", SYSTEM_LABEL), z)
    basis = spin_basis_rotation(z) if second == "x" else z
    chain = premeasure(chain, pauli(second, SYSTEM_LABEL), basis)

    p = np.abs(np.asarray(amplitudes)) ** 2
    # expected pr(P2 = j | P1 = i)
    expected = np.full((2, 2), 0.5) if second == "x" else np.eye(2)

    probs = report.table("probabilities", ("quantity", "value", "expected"),
                         str(Provenance.FUNDAMENTAL))
    errors = []

    def row(name: str, value: float, want: float) -> None:
        probs.add(name, value, want)
        errors.append(abs(value - want))

    for i, sign in enumerate(OUTCOME_SIGNS):
        row(f"pr(P1={sign})", joint_probability(chain, [("P1", i)]), p[i])
    for i, first in enumerate(OUTCOME_SIGNS):
        for j, sign in enumerate(OUTCOME_SIGNS):
            row(f"pr(P1={first},P2={second}{sign})",
                joint_probability(chain, [("P1", i), ("P2", j)]), p[i] * expected[i, j])
    for i, first in enumerate(OUTCOME_SIGNS):
        if p[i] <= ZERO_PROBABILITY:
            continue
        for j, sign in enumerate(OUTCOME_SIGNS):
            row(f"pr(P2={second}{sign}|P1={first})",
                conditional_probability(chain, ("P2", j), [("P1", i)]), expected[i, j])

    joint = report.table("outcomes", ("P1", "P2", "probability"), str(Provenance.FUNDAMENTAL))
    table = outcome_distribution(chain, ["P1", "P2"])
    for i, j in np.ndindex(*table.shape):
        joint.add(OUTCOME_SIGNS[i], OUTCOME_SIGNS[j], table[i, j])

    pointer = pointer_reduced_state(chain, "P1")
    diag = report.table("pointer_state", ("index", "population"), str(pointer.provenance))
    for k, value in enumerate(np.real(np.diag(pointer.matrix))):
        diag.add(k, value)
    off = pointer.matrix - np.diag(np.diag(pointer.matrix))

    step = chain.steps[-1]
    u = coupling_unitary(chain.space, chain.system_space, step.eigenbasis, step.pointer)
    tol = config.tolerance
    report.check(check_below("probabilities", max(errors), tol))
    report.check(check_below("pointer_state_diagonal", np.max(np.abs(off)), tol))
    report.check(check_below("coupling_unitarity", coupling_unitarity_residual(u), tol))


def run_contrast(config: ScenarioConfig, report: ScenarioReport) -> None:
    """Repeated sigma_z: true chain table against the reduced-state prediction."""
    amplitudes = config.parameters["amplitudes"]
    chain = premeasure(MeasurementChain.start(_qubit(amplitudes)),
                       pauli("z", SYSTEM_LABEL), spin_z_basis())
    prediction = reduced_chain_predictor(chain, tolerance=config.tolerance)
    p = np.abs(np.asarray(amplitudes)) ** 2

    for name, values, tag in (("true_joint", prediction.true, Provenance.FUNDAMENTAL),
                              ("flawed_joint", prediction.flawed, Provenance.REDUCED)):
        t = report.table(name, ("first", "second", "probability"), str(tag))
        for i, j in np.ndindex(*values.shape):
            t.add(OUTCOME_SIGNS[i], OUTCOME_SIGNS[j], values[i, j])
    summary = report.table("summary", ("quantity", "value"))
    summary.add("max_discrepancy", prediction.max_discrepancy)
    summary.add("disagrees", prediction.disagrees)

    tol = config.tolerance
    report.check(check_below("true_joint", np.max(np.abs(prediction.true - np.diag(p))), tol))
    report.check(check_below("flawed_joint",
                             np.max(np.abs(prediction.flawed - np.outer(p, p))), tol))
    report.check(check_below("discrepancy", abs(prediction.max_discrepancy - p[0] * p[1]), tol))


def run_decohere(config: ScenarioConfig, report: ScenarioReport) -> None:
    params = config.parameters
    model = build_spin_bath(params["bath_size"], params["couplings"], seed=config.seed)
    times = np.linspace(0.0, params["t_max"], params["samples"])
    retained = params["retained"]
    trajectory = run_trajectory(model, params["amplitudes"], times,
                                retained=retained, workers=params["workers"])

    couplings = report.table("couplings", ("spin", "coupling"))
    for label, g in zip(model.bath_labels, model.couplings):
        couplings.add(label, g)

    central = retained == SYSTEM_LABEL
    columns = ["t", "offdiag"] + (["closed_form"] if central else []) + ["purity", "full_purity"]
    table = report.table("trajectory", columns, str(Provenance.REDUCED))
    closed = closed_form_coherence(model, params["amplitudes"], times) if central else None
    for k, t in enumerate(trajectory.times):
        values = [t, trajectory.offdiag_magnitudes[k]]
        if central:
            values.append(closed[k])
        values += [trajectory.purity_series[k], trajectory.full_purity_series[k]]
        table.add(*values)

    t_dec = None
    if trajectory.offdiag_magnitudes[0] > 0:
        t_dec = decoherence_time(trajectory, params["threshold"]).time
    late = trajectory.offdiag_magnitudes[int(len(times) * (1 - params["window"])):]
    summary = report.table("summary", ("quantity", "value"))
    summary.add("decoherence_time", t_dec)
    summary.add("late_mean_offdiag", float(np.mean(late)) if late else None)

    observables = {name: pauli(name, retained) for name in ("x", "y", "z")}
    convergence = report.table(
        "convergence",
        ("observable", "initial", "late_mean", "fluctuation", "converged"),
        str(Provenance.REDUCED),
    )
    for c in expectation_convergence(trajectory, observables, params["window"],
                                     params["epsilon"]):
        convergence.add(f"sigma_{c.name}", c.initial_value, c.late_mean, c.fluctuation,
                        c.converged)

    tol = config.tolerance
    if central:
        gap = np.max(np.abs(np.asarray(trajectory.offdiag_magnitudes) - closed))
        report.check(check_below("closed_form", gap, tol))
    report.check(check_below("full_purity",
                             max(abs(1 - x) for x in trajectory.full_purity_series), tol))
    report.check(check_below("reduced_trace",
                             max(abs(r.op.trace() - 1) for r in trajectory.reduced_states), tol))


def run_recohere(config: ScenarioConfig, report: ScenarioReport) -> None:
    params = config.parameters
    n = params["bath_size"]
    model = build_spin_bath(n, [params["coupling"]] * n)
    times = np.linspace(0.0, params["t_max"], params["samples"])
    trajectory = run_trajectory(model, params["amplitudes"], times)
    closed = closed_form_coherence(model, params["amplitudes"], times)

    table = report.table("trajectory", ("t", "offdiag", "closed_form", "purity"),
                         str(Provenance.REDUCED))
    for k, t in enumerate(trajectory.times):
        table.add(t, trajectory.offdiag_magnitudes[k], closed[k], trajectory.purity_series[k])

    result = recoherence_check(model, trajectory)
    summary = report.table("recoherence", ("quantity", "value"))
    summary.add("revival_time", result.revival_time)
    summary.add("initial_offdiag", result.initial_coherence)
    summary.add("revived_offdiag", result.revived_coherence)
    summary.add("decohered_time", result.decohered_time)
    summary.add("mixture_distance", result.mixture_distance)
    summary.add("mixture_max_offdiag", result.mixture_max_coherence)
    summary.add("discriminates", result.discriminates)

    tol = config.tolerance
    report.check(check_below("closed_form",
                             np.max(np.abs(np.asarray(trajectory.offdiag_magnitudes) - closed)),
                             tol))
    report.check(check_below("revival", abs(result.revived_coherence - result.initial_coherence),
                             max(tol, REVIVAL_TOLERANCE)))
    report.check(check_below("mixture_offdiag", result.mixture_max_coherence,
                             MIXTURE_TOLERANCE))
    report.check(check_below("mixture_matrix_equality", result.mixture_distance, tol))


def _projector_residuals(rho, traced) -> Tuple[float, float, float, float]:
    """Idempotence, trace recovery, local expectation and definitional residuals."""
    cg = coarse_grain(rho, traced)
    idempotence = frobenius_distance(apply_projector(cg.rho_cg.op, traced), cg.rho_cg.op)
    recovery = frobenius_distance(recover_reduced(cg).op, cg.reduced.op)
    expectation_gap = max(coarse_grained_expectation_check(rho, o1, traced)
                          for o1 in local_observable_basis(cg.reduced.space))
    definition = verify_reduced_definition(rho, cg.reduced, cg.reduced.space.labels)
    return idempotence, recovery, expectation_gap, definition


def _residual_corpus(report: ScenarioReport, space: SpaceSpec, rng: np.random.Generator,
                     samples: int, tol: float) -> None:
    if samples < 1:
        raise ScenarioError(f"samples must be positive, got {samples}")
    table = report.table("projector_residuals",
                         ("sample", "idempotence", "trace_recovery", "expectation",
                          "definition"),
                         str(Provenance.COARSE_GRAINED))
    worst = np.zeros(4)
    for k in range(samples):
        # alternate pure and full-rank states
        rho = random_density(space, rng, rank=1 if k % 2 else None)
        residuals = _projector_residuals(rho, ["B"])
        table.add(k, *residuals)
        worst = np.maximum(worst, residuals)
    for name, value in zip(("idempotence", "trace_recovery", "local_expectation",
                            "reduced_definition"), worst):
        report.check(check_below(name, value, tol))
    if space.dim <= PROJECTOR_MATRIX_LIMIT:
        p = projector_matrix(space, ["B"])
        report.check(check_below("projector_matrix_idempotent",
                                 np.linalg.norm(p @ p - p), tol))
        report.check(check_below("projector_matrix_self_adjoint",
                                 np.linalg.norm(p - p.conj().T), tol))


def run_coarse_grain(config: ScenarioConfig, report: ScenarioReport) -> None:
    params = config.parameters
    space = _bipartite(params["dims"])
    if params["steps"] < 0:
        raise ScenarioError(f"steps must be nonnegative, got {params['steps']}")
    rng = np.random.default_rng(config.seed)
    tol = config.tolerance
    _residual_corpus(report, space, rng, params["samples"], tol)

    a, b = (space.subspace([label]) for label in space.labels)
    h = Hamiltonian.build(space, ["A"], h1=random_hermitian(a, rng),
                          h2=random_hermitian(b, rng),
                          h_int=random_hermitian(space, rng, scale=0.5))
    rho0 = random_density(space, rng, rank=1)
    o = random_hermitian(space, rng)
    times = np.linspace(0.0, params["t_max"], params["steps"] + 1)
    full = evolve_many(rho0, h, times)
    coarse = coarse_grained_trajectory(rho0, h, times, ["B"])

    table = report.table("trajectory",
                         ("t", "full_purity", "coarse_purity", "reduced_entropy",
                          "correlation_gap"),
                         str(Provenance.COARSE_GRAINED))
    consistency = 0.0
    for t, rho, cg in zip(times, full, coarse):
        table.add(t, purity(rho), purity(cg.rho_cg), von_neumann_entropy(cg.reduced),
                  correlation_gap(rho, o, ["B"]))
        consistency = max(consistency,
                          frobenius_distance(cg.reduced.op, partial_trace(rho, ["B"]).op))
    report.check(check_below("trajectory_reduced_consistency", consistency, tol))


def _z_like(space: SpaceSpec) -> LinOp:
    """diag(1, -1, 0, ...), sigma_z on a qubit."""
    d = np.zeros(space.dim)
    d[0] = 1.0
    if space.dim > 1:
        d[1] = -1.0
    return LinOp(space, np.diag(d))


def run_verify(config: ScenarioConfig, report: ScenarioReport) -> None:
    """Property suite on seeded random states of a bipartite space."""
    params = config.parameters
    space = _bipartite(params["dims"])
    rng = np.random.default_rng(config.seed)
    tol = config.tolerance
    _residual_corpus(report, space, rng, params["samples"], tol)

    a, b = (space.subspace([label]) for label in space.labels)
    h1, h2 = random_hermitian(a, rng), random_hermitian(b, rng)
    free = Hamiltonian.build(space, ["A"], h1=h1, h2=h2)
    rho0 = random_density(space, rng)
    reduced0 = partial_trace(rho0, ["B"])
    times = np.linspace(0.0, 2.0, 10)
    local_gap = 0.0
    spectrum_drift = 0.0
    for t, rho in zip(times, evolve_many(rho0, free, times)):
        reduced = partial_trace(rho, ["B"])
        local = evolve_reduced_noninteracting(reduced0, h1, t)
        local_gap = max(local_gap, frobenius_distance(reduced.op, local.op))
        spectrum_drift = max(spectrum_drift,
                             float(np.max(np.abs(spectrum(reduced) - spectrum(reduced0)))))

    coupled = Hamiltonian.build(space, ["A"], h_int=tensor_product(_z_like(a), _z_like(b)))
    factorized = factorization_check(free, 1.0)
    counterexample = factorization_check(coupled, 1.0)

    dynamics = report.table("dynamics", ("quantity", "value"))
    dynamics.add("noninteracting_local_gap", local_gap)
    dynamics.add("reduced_spectrum_drift", spectrum_drift)
    dynamics.add("factorization_residual", factorized.residual)
    dynamics.add("interacting_factorization_residual", counterexample.residual)

    report.check(check_below("noninteracting_reduced_dynamics", local_gap, tol))
    report.check(check_below("reduced_spectrum_invariance", spectrum_drift, max(tol, 1e-9)))
    report.check(check_below("factorization", factorized.residual, tol))
    report.check(check_above("interacting_factorization_fails", counterexample.residual,
                             FACTORIZATION_GAP))


def run_classical(config: ScenarioConfig, report: ScenarioReport) -> None:
    params = config.parameters
    n = params["resolution"]
    partition = CellPartition(n, params["blocks"])
    initial = params["initial"]
    if initial == "uniform":
        field = DensityField.uniform(n)
    elif initial == "random":
        field = DensityField.random(n, np.random.default_rng(config.seed))
    else:
        field = DensityField.left_half(n)
    approach = equilibrium_approach(field, partition, params["steps"])

    table = report.table("series",
                         ("step", "coarse_distance", "fine_distance", "coarse_entropy",
                          "fine_entropy", "occupied"),
                         "classical")
    for k in range(approach.steps + 1):
        table.add(k, approach.coarse_distances[k], approach.fine_distances[k],
                  approach.coarse_entropies[k], approach.fine_entropies[k],
                  approach.liouville.occupied_counts[k])
    summary = report.table("summary", ("quantity", "value"))
    summary.add("first_equilibrated_step", approach.first_equilibrated_step)

    coarse = coarse_grain_classical(field, partition)
    twice = coarse_grain_classical(coarse, partition)
    counts = approach.liouville.occupied_counts
    report.check(check_below("mass_conservation", approach.liouville.max_mass_error,
                             config.tolerance))
    report.check(check_below("occupied_cells_constant", max(counts) - min(counts), 0.0))
    report.check(check_below("coarse_grain_idempotent",
                             np.max(np.abs(twice.values - coarse.values)), 0.0))
    if initial != "uniform":
        # coarse density reaches uniform while the fine one stays away from it
        report.check(check_below("coarse_equilibrium", min(approach.coarse_distances),
                                 EQUILIBRIUM_THRESHOLD))
        report.check(check_above("fine_distance_bounded", min(approach.fine_distances),
                                 EQUILIBRIUM_THRESHOLD))


SCENARIO_RUNNERS: Dict[str, Callable[[ScenarioConfig, ScenarioReport], None]] = {
    "consecutive": run_consecutive,
    "contrast": run_contrast,
    "decohere": run_decohere,
    "recohere": run_recohere,
    "coarse-grain": run_coarse_grain,
    "classical": run_classical,
    "verify": run_verify,
}


def run(config: ScenarioConfig) -> ScenarioReport:
    """Execute one scenario; deterministic for a given config and seed."""
    report = ScenarioReport(config.scenario, config.echo())
    logger.info("running scenario '%s'", config.scenario)
    SCENARIO_RUNNERS[config.scenario](config, report)
    failures: List[str] = [c.name for c in report.failures()]
    if failures:
        logger.warning("scenario '%s': failed checks %s", config.scenario, failures)
    return report
