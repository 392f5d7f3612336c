import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from conftest import SEEDS, qubits
from src.measurement import (
    MeasurementChain, MeasurementError, PointerFactor, ZeroProbabilityError,
    basis_coefficients, conditional_probability, coupling_unitarity_residual,
    coupling_unitary, eigenbasis_of, joint_probability, outcome_distribution,
    pointer_reduced_state, premeasure, premeasure_density, reduced_chain_predictor,
    spin_basis_rotation, spin_z_basis, system_reduced_state,
)
from src.sampling import random_hermitian, random_state_vector
from src.states import StateVector, pure
from src.tensor import LinOp, SpaceError, SpaceSpec, pauli

S = qubits("S")
Z = spin_z_basis()
X = spin_basis_rotation(Z)


def qubit(c_plus, c_minus):
    return StateVector(S, np.array([c_plus, c_minus]))


def z_then(second, c_plus, c_minus):
    chain = premeasure(MeasurementChain.start(qubit(c_plus, c_minus)), pauli("z", "S"), Z)
    if second == "x":
        return premeasure(chain, pauli("x", "S"), X)
    return premeasure(chain, pauli("z", "S"), Z)


amplitude_pairs = st.floats(min_value=0.01, max_value=0.99).map(
    lambda p: (np.sqrt(p), np.sqrt(1 - p)))


def test_pointer_factor_standard():
    pointer = PointerFactor.standard("P1", 2)
    assert pointer.dim == 3
    assert pointer.ready_index == 0
    assert pointer.outcome_indices == (1, 2)
    assert_allclose(pointer.ready_state().amplitudes, [1, 0, 0])


def test_pointer_factor_rejects_reused_index():
    with pytest.raises(MeasurementError):
        PointerFactor("P", 3, 1, (1, 2))


def test_transposition_swaps_ready_and_outcome():
    t = PointerFactor.standard("P", 2).transposition(1).matrix
    assert_allclose(t @ np.array([1, 0, 0]), [0, 0, 1])
    assert_allclose(t @ t, np.eye(3))


def test_premeasurement_correlates_pointer():
    c_plus, c_minus = 0.6, 0.8
    chain = premeasure(MeasurementChain.start(qubit(c_plus, c_minus)), pauli("z", "S"), Z)
    expected = np.zeros(6)
    expected[0 * 3 + 1] = c_plus
    expected[1 * 3 + 2] = c_minus
    assert_allclose(chain.state.amplitudes, expected, atol=1e-15)
    assert chain.pointer_labels == ("P1",)


def test_eigenstate_input_is_certain():
    chain = premeasure(MeasurementChain.start(qubit(1, 0)), pauli("z", "S"), Z)
    assert joint_probability(chain, [("P1", 0)]) == pytest.approx(1.0)
    assert joint_probability(chain, [("P1", 1)]) == pytest.approx(0.0)


def test_second_premeasurement_amplitudes():
    c_plus, c_minus = 0.6, 0.8j
    chain = z_then("x", c_plus, c_minus)
    amps = chain.state.amplitudes.reshape(2, 3, 3)
    # express the system factor in the x basis
    in_x = np.einsum("sj,spq->jpq", X.conj(), amps)
    expected = np.zeros((2, 3, 3), dtype=complex)
    r = 1 / np.sqrt(2)
    expected[0, 1, 1] = c_plus * r
    expected[1, 1, 2] = c_plus * r
    expected[0, 2, 1] = c_minus * r
    expected[1, 2, 2] = -c_minus * r
    assert_allclose(in_x, expected, atol=1e-14)


@given(amplitude_pairs)
@settings(max_examples=20)
def test_different_observable_conditionals(pair):
    c_plus, c_minus = pair
    chain = z_then("x", c_plus, c_minus)
    p_plus = c_plus ** 2
    assert joint_probability(chain, [("P2", 0), ("P1", 0)]) == pytest.approx(p_plus / 2, abs=1e-10)
    assert joint_probability(chain, [("P1", 0)]) == pytest.approx(p_plus, abs=1e-10)
    assert conditional_probability(chain, ("P2", 0), [("P1", 0)]) == \
        pytest.approx(0.5, abs=1e-10)


@given(amplitude_pairs)
@settings(max_examples=20)
def test_same_observable_conditionals(pair):
    chain = z_then("z", *pair)
    assert conditional_probability(chain, ("P2", 0), [("P1", 0)]) == pytest.approx(1, abs=1e-10)
    assert conditional_probability(chain, ("P2", 1), [("P1", 0)]) == pytest.approx(0, abs=1e-10)


def test_joint_probability_order_independent(rng):
    chain = MeasurementChain.start(random_state_vector(S, rng))
    for _ in range(3):
        chain = premeasure(chain, random_hermitian(S, rng))
    events = [("P1", 1), ("P2", 0), ("P3", 1)]
    forward = joint_probability(chain, events)
    assert joint_probability(chain, events[::-1]) == forward
    assert joint_probability(chain, [events[1], events[2], events[0]]) == forward


def test_outcome_distribution_sums_to_one(rng):
    chain = z_then("x", 0.6, 0.8)
    table = outcome_distribution(chain, ["P1", "P2"])
    assert table.shape == (2, 2)
    assert table.sum() == pytest.approx(1.0)


def test_conditioning_on_impossible_event():
    chain = z_then("z", 1.0, 0.0)
    with pytest.raises(ZeroProbabilityError):
        conditional_probability(chain, ("P2", 0), [("P1", 1)])


def test_unknown_pointer_and_outcome():
    chain = z_then("z", 0.6, 0.8)
    with pytest.raises(MeasurementError, match="no pointer"):
        joint_probability(chain, [("P9", 0)])
    with pytest.raises(MeasurementError, match="no outcome"):
        joint_probability(chain, [("P1", 5)])


def test_pointer_label_collision():
    chain = premeasure(MeasurementChain.start(qubit(0.6, 0.8)), pauli("z", "S"), Z)
    with pytest.raises(MeasurementError, match="already in use"):
        premeasure(chain, pauli("z", "S"), Z, PointerFactor.standard("P1", 2))


def test_observable_on_wrong_space():
    with pytest.raises(SpaceError):
        premeasure(MeasurementChain.start(qubit(0.6, 0.8)), pauli("z", "Q"), Z)


def test_degenerate_observable_rejected():
    with pytest.raises(MeasurementError, match="degenerate"):
        eigenbasis_of(LinOp.identity(S))


def test_eigenbasis_descending():
    values, _ = eigenbasis_of(pauli("x", "S"))
    assert_allclose(values, [1, -1])


def test_non_orthonormal_basis_rejected():
    with pytest.raises(MeasurementError, match="orthonormal"):
        premeasure(MeasurementChain.start(qubit(0.6, 0.8)), pauli("z", "S"),
                   [np.array([1, 0]), np.array([1, 1]) / np.sqrt(2)])


@pytest.mark.parametrize("column, expected", [
    (0, [1 / np.sqrt(2), 1 / np.sqrt(2)]),
    (1, [1 / np.sqrt(2), -1 / np.sqrt(2)]),
])
def test_z_states_in_x_basis(column, expected):
    assert_allclose(basis_coefficients(Z[:, column], X), expected)


def test_rotation_twice_returns_basis():
    assert_allclose(spin_basis_rotation(spin_basis_rotation(Z)), Z, atol=1e-15)


def test_pointer_reduced_state_is_diagonal():
    chain = z_then("x", 0.6, 0.8)
    rho = pointer_reduced_state(chain, "P1")
    assert_allclose(rho.matrix, np.diag([0, 0.36, 0.64]), atol=1e-14)


def test_system_reduced_state_after_z():
    chain = premeasure(MeasurementChain.start(qubit(0.6, 0.8)), pauli("z", "S"), Z)
    assert_allclose(system_reduced_state(chain).matrix, np.diag([0.36, 0.64]), atol=1e-15)


def test_premeasure_density_matches_pure_chain():
    start = MeasurementChain.start(qubit(0.6, 0.8))
    chain = premeasure(start, pauli("x", "S"), X)
    rho = premeasure_density(pure(start.state), S, X, PointerFactor.standard("P1", 2))
    assert_allclose(rho.matrix, pure(chain.state).matrix, atol=1e-14)


def test_coupling_is_unitary(rng):
    space = S.concat(PointerFactor.standard("P", 2).space)
    _, basis = eigenbasis_of(random_hermitian(S, rng))
    u = coupling_unitary(space, S, basis, PointerFactor.standard("P", 2))
    assert coupling_unitarity_residual(u) < 1e-12


def test_reduced_predictor_contrast():
    chain = premeasure(MeasurementChain.start(qubit(0.6, 0.8)), pauli("z", "S"), Z)
    prediction = reduced_chain_predictor(chain)
    assert prediction.flawed[0, 1] == pytest.approx(0.2304, abs=1e-12)
    assert prediction.true[0, 1] == pytest.approx(0.0, abs=1e-12)
    assert prediction.disagrees
    assert prediction.max_discrepancy == pytest.approx(0.2304, abs=1e-12)
    for flawed, true in zip(prediction.flawed_marginals, prediction.true_marginals):
        assert_allclose(flawed, [0.36, 0.64], atol=1e-12)
        assert_allclose(true, [0.36, 0.64], atol=1e-12)


def test_reduced_predictor_agrees_without_superposition():
    chain = premeasure(MeasurementChain.start(qubit(1, 0)), pauli("z", "S"), Z)
    prediction = reduced_chain_predictor(chain)
    assert not prediction.disagrees
    assert_allclose(prediction.flawed, prediction.true, atol=1e-12)


def test_reduced_predictor_needs_a_step():
    with pytest.raises(MeasurementError):
        reduced_chain_predictor(MeasurementChain.start(qubit(0.6, 0.8)))


def collapse_recipe(psi, bases):
    """Joint outcome table from stepwise projection and renormalization."""
    table = np.zeros((2,) * len(bases))
    for outcomes in np.ndindex(*table.shape):
        state = psi
        p = 1.0
        for basis, k in zip(bases, outcomes):
            amplitude = np.vdot(basis[:, k], state)
            p *= abs(amplitude) ** 2
            state = basis[:, k]
        table[outcomes] = p
    return table


@given(seed=SEEDS)
@settings(max_examples=50, deadline=None)
def test_three_step_chain_matches_collapse_recipe(seed):
    rng = np.random.default_rng(seed)
    initial = random_state_vector(S, rng)
    chain = MeasurementChain.start(initial)
    bases = []
    for _ in range(3):
        observable = random_hermitian(S, rng)
        _, basis = eigenbasis_of(observable)
        bases.append(basis)
        chain = premeasure(chain, observable, basis)
    oracle = collapse_recipe(initial.amplitudes, bases)
    table = outcome_distribution(chain, ["P1", "P2", "P3"])
    assert_allclose(table, oracle, atol=1e-10)
    for i, j in np.ndindex(2, 2):
        given_events = [("P1", i), ("P2", j)]
        if joint_probability(chain, given_events) > 1e-9:
            p = conditional_probability(chain, ("P3", 0), given_events)
            assert p == pytest.approx(oracle[i, j, 0] / oracle[i, j].sum(), abs=1e-10)


def test_chain_on_composite_system(rng):
    system = SpaceSpec.of(("A", 2), ("B", 2))
    chain = MeasurementChain.start(random_state_vector(system, rng))
    observable = random_hermitian(system, rng)
    chain = premeasure(chain, observable)
    assert chain.space.labels == ("A", "B", "P1")
    assert outcome_distribution(chain, ["P1"]).sum() == pytest.approx(1.0)


@given(seed=SEEDS)
@settings(max_examples=30, deadline=None)
def test_conditionals_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    chain = MeasurementChain.start(random_state_vector(S, rng))
    for _ in range(3):
        chain = premeasure(chain, random_hermitian(S, rng))
    for given_events in ([("P1", 0)], [("P1", 1)], [("P1", 1), ("P3", 0)]):
        if joint_probability(chain, given_events) <= 1e-9:
            continue
        total = sum(conditional_probability(chain, ("P2", j), given_events) for j in range(2))
        assert total == pytest.approx(1.0, abs=1e-10)
