import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from conftest import SEEDS, correlated_state, qubits
from src.reduction import partial_trace
from src.sampling import random_density, random_hermitian, random_state_vector
from src.states import (
    DensityOperator, Provenance, StateError, StateVector, expectation, maximally_mixed,
    product, product_state, proper_mixture, pure, purity, spectrum, von_neumann_entropy,
)
from src.tensor import LinOp, SpaceSpec, basis_projector, embed, pauli

Q = qubits("q")


def test_pure_basis_state():
    assert_allclose(pure(StateVector.basis(Q, 0)).matrix, np.diag([1, 0]))


def test_pure_uniform_superposition():
    rho = pure(StateVector(Q, np.array([1, 1]) / np.sqrt(2)))
    assert_allclose(rho.matrix, np.full((2, 2), 0.5))


def test_pure_correlated_state_entries():
    rho = correlated_state(1 / np.sqrt(2), 1 / np.sqrt(2)).matrix
    expected = np.zeros((4, 4))
    for i in (0, 3):
        for j in (0, 3):
            expected[i, j] = 0.5
    assert_allclose(rho, expected, atol=1e-15)


def test_state_vector_norm_enforced():
    with pytest.raises(StateError, match="norm"):
        StateVector(Q, np.array([1.0, 1.0]))


@given(arrays(np.float64, 4, elements=st.floats(-10, 10)))
def test_normalized_has_unit_norm(values):
    assume(np.linalg.norm(values) > 1e-3)
    v = StateVector.normalized(qubits("A", "B"), values)
    assert np.linalg.norm(v.amplitudes) == pytest.approx(1.0)


def test_normalize_zero_vector():
    with pytest.raises(StateError, match="zero vector"):
        StateVector.normalized(Q, [0, 0])


@pytest.mark.parametrize("matrix, message", [
    (np.diag([0.5, 0.4]), "trace"),
    (np.array([[0.5, 0.1], [0.0, 0.5]]), "Hermitian"),
    (np.diag([1.2, -0.2]), "negative eigenvalue"),
])
def test_density_invariants_enforced(matrix, message):
    with pytest.raises(StateError, match=message):
        DensityOperator(LinOp(Q, matrix))


def test_mixture_singleton():
    rho = random_density(Q, np.random.default_rng(3))
    assert_allclose(proper_mixture([1.0], [rho]).matrix, rho.matrix)


def test_mixture_of_basis_states():
    states = [DensityOperator(basis_projector(Q, i)) for i in range(2)]
    mix = proper_mixture([0.5, 0.5], states)
    assert_allclose(mix.matrix, np.eye(2) / 2)
    assert mix.provenance is Provenance.PROPER_MIXTURE


def test_proper_and_improper_mixture_share_matrix():
    improper = partial_trace(correlated_state(0.6, 0.8), ["P"])
    states = [DensityOperator(basis_projector(improper.space, i)) for i in range(2)]
    proper = proper_mixture([0.36, 0.64], states)
    assert_allclose(proper.matrix, improper.matrix, atol=1e-15)
    assert proper.provenance != improper.provenance
    for o in (pauli("x", "S"), pauli("z", "S")):
        assert expectation(proper, o) == pytest.approx(expectation(improper, o))


@pytest.mark.parametrize("weights", [[0.5, 0.6], [1.2, -0.2], [1.0]])
def test_mixture_weights_validated(weights):
    states = [DensityOperator(basis_projector(Q, i)) for i in range(2)]
    with pytest.raises(StateError):
        proper_mixture(weights, states)


def test_expectation_examples():
    rho = random_density(qubits("A", "B"), np.random.default_rng(1))
    assert expectation(rho, LinOp.identity(rho.space)) == pytest.approx(1.0)
    assert expectation(pure(StateVector.basis(Q, 0)), pauli("z")) == 1.0
    rho = correlated_state(0.6, 0.8)
    assert expectation(rho, embed(pauli("z"), rho.space, "S")) == pytest.approx(-0.28)


def test_expectation_requires_hermitian():
    with pytest.raises(StateError, match="Hermitian"):
        expectation(maximally_mixed(Q), LinOp(Q, np.array([[0, 1], [0, 0]])))


def test_purity_examples():
    assert purity(pure(StateVector.basis(Q, 1))) == pytest.approx(1.0)
    assert purity(maximally_mixed(Q)) == pytest.approx(0.5)
    states = [DensityOperator(basis_projector(Q, i)) for i in range(2)]
    assert purity(proper_mixture([0.36, 0.64], states)) == pytest.approx(0.5392)


@given(seed=SEEDS)
@settings(max_examples=40, deadline=None)
def test_purity_bounds(seed):
    rng = np.random.default_rng(seed)
    space = SpaceSpec.of(("A", 2), ("B", 3))
    rho = random_density(space, rng, rank=int(rng.integers(1, 7)))
    assert 1 / space.dim - 1e-12 <= purity(rho) <= 1 + 1e-12
    assert spectrum(rho).sum() == pytest.approx(1.0)


def test_product_tags():
    a = maximally_mixed(qubits("A"))
    b = maximally_mixed(qubits("B"), Provenance.REDUCED)
    with pytest.raises(StateError, match="pass a provenance"):
        product(a, b)
    joined = product(a, b, Provenance.COARSE_GRAINED)
    assert joined.provenance is Provenance.COARSE_GRAINED
    assert_allclose(joined.matrix, np.eye(4) / 4)


def test_product_state_kron():
    rng = np.random.default_rng(5)
    a = random_state_vector(qubits("A"), rng)
    b = random_state_vector(SpaceSpec.single("B", 3), rng)
    assert_allclose(product_state(a, b).amplitudes, np.kron(a.amplitudes, b.amplitudes))


def test_entropy_values():
    assert von_neumann_entropy(pure(StateVector.basis(Q, 0))) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(maximally_mixed(Q)) == pytest.approx(np.log(2))


def test_provenance_str():
    assert str(Provenance.COARSE_GRAINED) == "coarse-grained"


@given(seed=SEEDS)
@settings(max_examples=30, deadline=None)
def test_expectation_is_linear(seed):
    rng = np.random.default_rng(seed)
    space = SpaceSpec.of(("A", 2), ("B", 3))
    rho = random_density(space, rng)
    a, b = random_hermitian(space, rng), random_hermitian(space, rng)
    alpha, beta = (float(x) for x in rng.uniform(-2, 2, size=2))
    combined = expectation(rho, alpha * a + beta * b)
    assert combined == pytest.approx(alpha * expectation(rho, a) + beta * expectation(rho, b),
                                     abs=1e-10)


@given(seed=SEEDS, count=st.integers(min_value=1, max_value=4))
@settings(max_examples=30, deadline=None)
def test_mixture_purity_below_largest_component(seed, count):
    rng = np.random.default_rng(seed)
    space = qubits("A", "B")
    states = [random_density(space, rng, rank=int(rng.integers(1, 5))) for _ in range(count)]
    weights = rng.dirichlet(np.ones(count))
    mixture = proper_mixture(weights, states)
    assert purity(mixture) <= max(purity(rho) for rho in states) + 1e-12
