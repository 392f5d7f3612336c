import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.decoherence import (
    DecoherenceError, bath_state, build_spin_bath, closed_form_coherence,
    decoherence_time, expectation_convergence, initial_state, recoherence_check,
    run_trajectory,
)
from src.states import Provenance
from src.tensor import DIM_LIMIT_ENV, DimensionLimitError, pauli

HALF = (1 / math.sqrt(2), 1 / math.sqrt(2))


@pytest.fixture(scope="module")
def large_bath():
    model = build_spin_bath(8, seed=7)
    times = np.linspace(0, 50, 100)
    return model, run_trajectory(model, HALF, times)


def test_single_spin_hamiltonian():
    model = build_spin_bath(1, [1.0])
    assert_allclose(np.diag(model.hamiltonian.total.matrix).real, [0.5, -0.5, -0.5, 0.5])
    assert model.hamiltonian.total.is_hermitian()
    assert model.space.labels == ("S", "E1")


def test_empty_bath_rejected():
    with pytest.raises(DecoherenceError):
        build_spin_bath(0, [])


def test_random_couplings_need_seed():
    with pytest.raises(DecoherenceError, match="seed required"):
        build_spin_bath(3)


def test_seeded_couplings_reproducible():
    a = build_spin_bath(8, seed=11)
    b = build_spin_bath(8, seed=11)
    assert a.couplings == b.couplings
    assert all(0.5 <= g <= 1.5 for g in a.couplings)
    assert a.space.dim == 512
    assert a.hamiltonian.total.is_hermitian()


def test_coupling_count_mismatch():
    with pytest.raises(DecoherenceError):
        build_spin_bath(3, [1.0, 1.0])


def test_bath_respects_dimension_limit(monkeypatch):
    monkeypatch.setenv(DIM_LIMIT_ENV, "16")
    with pytest.raises(DimensionLimitError):
        build_spin_bath(4, [1.0] * 4)


def test_initial_state_is_product():
    model = build_spin_bath(2, [1.0, 0.5])
    rho = initial_state(model, (0.6, 0.8))
    assert rho.provenance is Provenance.FUNDAMENTAL
    assert_allclose(bath_state(model).matrix, np.full((4, 4), 0.25), atol=1e-15)


def test_trajectory_starts_at_initial_coherence():
    model = build_spin_bath(3, [0.7, 1.1, 1.3])
    trajectory = run_trajectory(model, HALF, [0.0, 0.3])
    assert trajectory.offdiag_magnitudes[0] == pytest.approx(0.5)
    assert trajectory.reduced_states[0].provenance is Provenance.REDUCED


def test_single_cosine_zero():
    model = build_spin_bath(1, [1.0])
    trajectory = run_trajectory(model, HALF, [np.pi / 2])
    assert trajectory.offdiag_magnitudes[0] == pytest.approx(0.0, abs=1e-12)


def test_trajectory_matches_closed_form(large_bath):
    model, trajectory = large_bath
    closed = closed_form_coherence(model, HALF, trajectory.times)
    assert_allclose(trajectory.offdiag_magnitudes, closed, atol=1e-10)


def test_large_bath_decoheres(large_bath):
    _, trajectory = large_bath
    late = trajectory.offdiag_magnitudes[50:]
    assert np.mean(late) < 0.05
    assert_allclose(trajectory.full_purity_series, 1.0, atol=1e-9)
    for reduced in trajectory.reduced_states:
        assert_allclose(np.diag(reduced.matrix).real, [0.5, 0.5], atol=1e-10)


def test_closed_form_general_bath_amplitudes():
    model = build_spin_bath(2, [0.8, 1.3], bath_amplitudes=(0.6, 0.8))
    times = np.linspace(0, 6, 25)
    trajectory = run_trajectory(model, (0.6, 0.8), times)
    assert_allclose(trajectory.offdiag_magnitudes,
                    closed_form_coherence(model, (0.6, 0.8), times), atol=1e-10)


def test_closed_form_refuses_transverse_field():
    model = build_spin_bath(1, [1.0], system_hamiltonian=pauli("x", "S"))
    with pytest.raises(DecoherenceError, match="diagonal"):
        closed_form_coherence(model, HALF, [0.0])


def test_unsorted_times_rejected():
    model = build_spin_bath(1, [1.0])
    with pytest.raises(DecoherenceError, match="sorted"):
        run_trajectory(model, HALF, [1.0, 0.5])


def test_threaded_trajectory_is_identical():
    model = build_spin_bath(4, [0.6, 0.9, 1.2, 1.4])
    times = np.linspace(0, 5, 20)
    serial = run_trajectory(model, HALF, times)
    threaded = run_trajectory(model, HALF, times, workers=3)
    assert serial.offdiag_magnitudes == threaded.offdiag_magnitudes


def test_other_retained_spin():
    model = build_spin_bath(2, [1.0, 0.5])
    trajectory = run_trajectory(model, HALF, np.linspace(0, 3, 7), retained="E1")
    assert trajectory.retained_label == "E1"
    assert trajectory.reduced_states[0].space.labels == ("E1",)
    assert trajectory.offdiag_magnitudes[0] == pytest.approx(0.5)


def test_no_interaction_never_decoheres():
    model = build_spin_bath(2, [0.0, 0.0])
    trajectory = run_trajectory(model, HALF, np.linspace(0, 10, 30))
    assert not decoherence_time(trajectory).reached


def test_single_spin_decoherence_time():
    model = build_spin_bath(1, [1.0])
    trajectory = run_trajectory(model, HALF, np.linspace(0, 2, 4001))
    result = decoherence_time(trajectory)
    assert result.reached
    assert result.time == pytest.approx(math.acos(1 / math.e), abs=1e-3)


def test_decoherence_time_shrinks_with_bath_size():
    times = np.linspace(0, 2, 401)
    crossings = []
    for n in (1, 2, 4, 6):
        trajectory = run_trajectory(build_spin_bath(n, [1.0] * n), HALF, times)
        crossings.append(decoherence_time(trajectory).time)
    assert crossings == sorted(crossings, reverse=True)
    assert crossings[-1] < crossings[0]


def test_decoherence_time_needs_coherence():
    model = build_spin_bath(1, [1.0])
    trajectory = run_trajectory(model, (1.0, 0.0), [0.0, 1.0])
    with pytest.raises(DecoherenceError, match="zero"):
        decoherence_time(trajectory)


def test_recoherence_and_proper_mixture():
    model = build_spin_bath(4, [1.0] * 4)
    trajectory = run_trajectory(model, HALF, np.linspace(0, 2 * np.pi, 65))
    report = recoherence_check(model, trajectory)
    assert report.revival_time == pytest.approx(np.pi)
    assert report.revived_coherence == pytest.approx(0.5, abs=1e-8)
    assert report.revived
    assert report.mixture_max_coherence < 1e-12
    assert report.mixture_distance < 1e-10
    assert report.discriminates


def test_recoherence_periodicity():
    model = build_spin_bath(3, [1.0] * 3)
    times = np.linspace(0, 1.5, 7)
    shifted = times + 2 * np.pi
    a = run_trajectory(model, HALF, times)
    b = run_trajectory(model, HALF, shifted)
    for ra, rb in zip(a.reduced_states, b.reduced_states):
        assert_allclose(ra.matrix, rb.matrix, atol=1e-8)


def test_recoherence_without_coupling():
    model = build_spin_bath(2, [0.0, 0.0])
    trajectory = run_trajectory(model, HALF, [0.0, 1.0])
    assert recoherence_check(model, trajectory).revived


def test_recoherence_needs_commensurate_couplings():
    model = build_spin_bath(2, [1.0, 1.3])
    trajectory = run_trajectory(model, HALF, [0.0, 1.0])
    with pytest.raises(DecoherenceError, match="commensurate"):
        recoherence_check(model, trajectory)


def test_sigma_z_is_conserved(large_bath):
    _, trajectory = large_bath
    (report,) = expectation_convergence(trajectory, {"z": pauli("z")})
    assert report.converged
    assert report.fluctuation == pytest.approx(0.0, abs=1e-12)


def test_sigma_x_converges_in_large_bath(large_bath):
    _, trajectory = large_bath
    (report,) = expectation_convergence(trajectory, {"x": pauli("x")})
    assert report.initial_value == pytest.approx(1.0)
    assert report.fluctuation < 0.05
    assert report.converged


def test_single_spin_keeps_oscillating():
    model = build_spin_bath(1, [1.0])
    trajectory = run_trajectory(model, HALF, np.linspace(0, 50, 100))
    (report,) = expectation_convergence(trajectory, {"x": pauli("x")})
    assert not report.converged


def test_convergence_window_validated(large_bath):
    _, trajectory = large_bath
    with pytest.raises(DecoherenceError, match="window"):
        expectation_convergence(trajectory, {"x": pauli("x")}, window=0.0)
