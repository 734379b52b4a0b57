from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qepi.errors import DomainError, SupportMismatch, TruncationBudgetExceeded
from qepi.services import fisher, fock
from qepi.services.phase_space import gaussian_entropy
from tests.property.settings import QUICK_SETTINGS

seeds = st.integers(min_value=0, max_value=2**32 - 1)
lambdas = st.floats(min_value=0.05, max_value=0.95)


def test_thermal_populations_are_geometric():
    state = fock.make_thermal(fock.fock_space(1, 40), 1.0)

    np.testing.assert_allclose(state.populations[:4], [0.5, 0.25, 0.125, 0.0625], atol=1e-10)
    assert state.tail_mass < 1e-8


def test_thermal_state_beyond_budget_is_refused():
    with pytest.raises(TruncationBudgetExceeded):
        fock.make_thermal(fock.fock_space(1, 8), 2.0)


def test_thermal_entropy_matches_closed_form():
    state = fock.make_thermal(fock.fock_space(1, 60), 1.0)

    assert fock.von_neumann_entropy(state) == pytest.approx(2 * math.log(2), abs=1e-6)


def test_density_matrix_requires_unit_trace(space12):
    with pytest.raises(DomainError):
        fock.DensityMatrix(space12, 2 * np.eye(space12.dim) / space12.dim)


def test_fock_state_moments():
    d, gamma = fock.moments(fock.make_fock(fock.fock_space(1, 10), 2))

    np.testing.assert_allclose(d, [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(gamma, 5 * np.eye(2), atol=1e-12)


def test_coherent_state_moments():
    alpha = 0.8 - 0.3j
    d, gamma = fock.moments(fock.make_coherent(fock.fock_space(1, 24), alpha))

    np.testing.assert_allclose(d, math.sqrt(2) * np.array([0.8, -0.3]), atol=1e-8)
    np.testing.assert_allclose(gamma, np.eye(2), atol=1e-7)


def test_displacement_moves_first_moments_forward():
    space = fock.fock_space(1, 30)
    xi = np.array([0.5, -0.3])
    d, gamma = fock.moments(fock.displace(fock.make_vacuum(space), xi, budget=None))

    np.testing.assert_allclose(d, xi, atol=1e-8)
    np.testing.assert_allclose(gamma, np.eye(2), atol=1e-8)


def test_displaced_thermal_moments():
    space = fock.fock_space(1, 20)
    d, gamma = fock.moments(fock.make_displaced_thermal(space, 0.5, 0.5))

    np.testing.assert_allclose(d, [math.sqrt(2) * 0.5, 0.0], atol=1e-6)
    np.testing.assert_allclose(gamma, 2 * np.eye(2), atol=1e-6)


def test_vacuum_characteristic_function():
    vacuum = fock.make_vacuum(fock.fock_space(1, 30))
    xi = np.array([0.7, -0.4])

    value = fock.characteristic_fn(vacuum, xi)

    assert value.real == pytest.approx(math.exp(-(xi @ xi) / 4), abs=1e-10)
    assert abs(value.imag) < 1e-10


def test_q_function_moments_of_coherent_state():
    alpha = 1.0 + 0.5j
    d, gamma, mass = fock.moments_from_q(fock.make_coherent(fock.fock_space(1, 20), alpha))

    assert mass == pytest.approx(1.0, abs=1e-3)
    np.testing.assert_allclose(d, math.sqrt(2) * np.array([1.0, 0.5]), atol=1e-3)
    np.testing.assert_allclose(gamma, np.eye(2), atol=1e-2)


def test_coherent_beamsplitter_output_is_coherent():
    space = fock.fock_space(1, 20)
    lam, alpha, beta = 0.3, 0.8, -0.4j
    out = fock.beamsplitter_combine(
        fock.make_coherent(space, alpha), fock.make_coherent(space, beta), lam
    )
    expected = fock.make_coherent(space, math.sqrt(lam) * alpha + math.sqrt(1 - lam) * beta)

    assert fock.fidelity(out, expected) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("lam", [0.25, 0.5, 0.8])
def test_single_photon_is_transmitted_with_probability_lambda(lam):
    space = fock.fock_space(1, 6)
    out = fock.beamsplitter_combine(fock.make_fock(space, 1), fock.make_vacuum(space), lam)

    np.testing.assert_allclose(out.populations[:2], [1 - lam, lam], atol=1e-12)


def test_exact_output_cutoff_keeps_all_mass():
    space = fock.fock_space(1, 6)
    out = fock.beamsplitter_combine(
        fock.make_fock(space, 5), fock.make_fock(space, 5), 0.5, output_cutoff=11
    )

    assert out.cutoff == 11
    assert float(np.trace(out.mat).real) == pytest.approx(1.0)
    assert out.populations[10] > 0


def test_truncated_beamsplitter_unitary_is_unitary():
    U = fock.beamsplitter_unitary(fock.fock_space(2, 6), 0.3)

    np.testing.assert_allclose(U @ U.conj().T, np.eye(36), atol=1e-12)


@given(seed=seeds, lam=lambdas)
@QUICK_SETTINGS
def test_beamsplitter_output_is_a_state(seed, lam):
    space = fock.fock_space(1, 6)
    x = fock.random_state(space, seed, 2)
    y = fock.random_state(space, seed + 1, 3)

    out = fock.beamsplitter_combine(x, y, lam, output_cutoff=11)

    assert out.spectrum.min() > -1e-10
    assert float(np.trace(out.mat).real) == pytest.approx(1.0)


def test_random_state_is_deterministic_and_has_requested_rank(space12):
    first = fock.random_state(space12, 42, 3)
    second = fock.random_state(space12, 42, 3)

    np.testing.assert_array_equal(first.mat, second.mat)
    assert np.linalg.matrix_rank(first.mat, tol=1e-10) == 3


def test_relative_entropy_of_state_with_itself(full_rank_state):
    assert fock.relative_entropy(full_rank_state, full_rank_state) == pytest.approx(0.0, abs=1e-9)


def test_relative_entropy_detects_support_mismatch(space12):
    with pytest.raises(SupportMismatch):
        fock.relative_entropy(fock.make_fock(space12, 1), fock.make_vacuum(space12))


def test_partial_trace_undoes_tensor(space12, full_rank_state):
    joint = fock.tensor(full_rank_state, fock.make_thermal(space12, 0.5, budget=None))

    np.testing.assert_allclose(fock.partial_trace(joint, 1).mat, full_rank_state.mat, atol=1e-12)


def test_compress_refuses_large_discards():
    state = fock.make_thermal(fock.fock_space(1, 30), 1.0, budget=None)

    with pytest.raises(TruncationBudgetExceeded):
        fock.compress(state, 10)


def test_phase_rotation_of_coherent_state():
    space = fock.fock_space(1, 20)
    phi = 0.7
    rotated = fock.phase_rotation(fock.make_coherent(space, 1.0), phi)

    expected = fock.make_coherent(space, np.exp(-1j * phi))
    assert fock.fidelity(rotated, expected) == pytest.approx(1.0, abs=1e-10)


def test_gaussification_of_single_photon():
    gaussian = fock.gaussify(fock.make_fock(fock.fock_space(1, 10), 1))

    np.testing.assert_allclose(gaussian.gamma, 3 * np.eye(2), atol=1e-12)
    assert gaussian_entropy(gaussian) == pytest.approx(2 * math.log(2))


@pytest.mark.parametrize("spec", ["cat", "fock"])
def test_non_gaussian_states_respect_maximum_entropy(spec):
    space = fock.fock_space(1, 20)
    state = fock.make_cat(space, 1.0, budget=None) if spec == "cat" else fock.make_fock(space, 3)

    assert fock.check_max_entropy(state).passed


def test_thermal_state_agrees_across_backends():
    report = fock.check_cross_backend(fock.make_thermal(fock.fock_space(1, 40), 0.5))

    assert report.passed, report.diagnostics


def test_compress_of_embedded_two_mode_state_restores_it():
    state = fock.random_state(fock.fock_space(2, 4), 3, 2)

    restored = fock.compress(fock.embed(state, 8), 4)

    assert restored.cutoff == 4
    np.testing.assert_allclose(restored.mat, state.mat, atol=1e-14)


@given(seed=seeds)
@QUICK_SETTINGS
def test_fidelity_stays_in_the_unit_interval(seed):
    space = fock.fock_space(1, 8)
    rho = fock.random_state(space, seed, 2)
    sigma = fock.random_state(space, seed + 1, regularize=1e-3)

    assert 0.0 <= fock.fidelity(rho, sigma) <= 1.0
    assert fock.fidelity(rho, rho) == pytest.approx(1.0, abs=1e-8)


def test_fidelity_of_a_pure_state_with_itself_is_one():
    coherent = fock.make_coherent(fock.fock_space(1, 20), 1.2 - 0.4j)

    assert fock.fidelity(coherent, coherent) == pytest.approx(1.0, abs=1e-12)


def test_vacuum_q_function_is_a_gaussian():
    vacuum = fock.make_vacuum(fock.fock_space(1, 30))

    for xi in ([0.0, 0.0], [0.8, -0.3], [1.5, 1.0]):
        expected = math.exp(-np.dot(xi, xi) / 2) / (2 * math.pi)
        assert fock.q_function(vacuum, np.array(xi)) == pytest.approx(expected, abs=1e-12)


def test_q_function_agrees_with_the_grid(full_rank_state):
    xs, ps, Q = fock.q_function_grid(full_rank_state, 2.0, 5)

    assert Q.min() >= 0
    assert fock.q_function(full_rank_state, np.array([xs[1], ps[3]])) == pytest.approx(Q[1, 3])


def test_q_function_of_a_product_factorizes(full_rank_state):
    vacuum = fock.make_vacuum(full_rank_state.space)
    joint = fock.tensor(full_rank_state, vacuum)
    first, second = np.array([0.4, -0.2]), np.array([-0.5, 0.9])

    value = fock.q_function(joint, np.concatenate([first, second]))

    assert value == pytest.approx(
        fock.q_function(full_rank_state, first) * fock.q_function(vacuum, second)
    )


def test_displacement_is_unitary_and_composes_up_to_a_phase():
    space = fock.fock_space(1, 40)
    a, b = np.array([0.3, -0.2]), np.array([0.1, 0.4])
    D_a, D_b = fock.displacement_op(space, a), fock.displacement_op(space, b)
    vacuum = np.zeros(space.dim)
    vacuum[0] = 1.0

    np.testing.assert_allclose(D_a @ D_a.conj().T, np.eye(space.dim), atol=1e-12)
    overlap = np.vdot(fock.displacement_op(space, a + b) @ vacuum, D_a @ D_b @ vacuum)
    assert abs(overlap) == pytest.approx(1.0, abs=1e-9)


def test_thermal_characteristic_function():
    N = 0.5
    thermal = fock.make_thermal(fock.fock_space(1, 60), N)
    xi = np.array([0.6, 0.3])

    value = fock.characteristic_fn(thermal, xi)

    assert value.real == pytest.approx(math.exp(-(2 * N + 1) * (xi @ xi) / 4), abs=1e-10)
    assert abs(value.imag) < 1e-10


def test_characteristic_function_of_a_product_factorizes(full_rank_state):
    other = fock.make_coherent(full_rank_state.space, 0.3 + 0.2j, budget=None)
    joint = fock.tensor(full_rank_state, other)
    first, second = np.array([0.5, -0.1]), np.array([0.2, 0.3])

    value = fock.characteristic_fn(joint, np.concatenate([first, second]))

    expected = fock.characteristic_fn(full_rank_state, first) * fock.characteristic_fn(
        other, second
    )
    assert value == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("N_rho, N_sigma", [(0.5, 1.0), (1.0, 0.5), (0.3, 2.0)])
def test_relative_entropy_of_thermal_states(N_rho, N_sigma):
    space = fock.fock_space(1, 60)
    rho = fock.make_thermal(space, N_rho, budget=None)
    sigma = fock.make_thermal(space, N_sigma, budget=None)
    g_rho = (N_rho + 1) * math.log(N_rho + 1) - N_rho * math.log(N_rho)
    expected = -g_rho + math.log(N_sigma + 1) + N_rho * math.log((N_sigma + 1) / N_sigma)

    assert fock.relative_entropy(rho, sigma) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize(
    "make_channel",
    [
        lambda ancilla: fisher.ConvexMixingChannel(ancilla, 0.3),
        lambda ancilla: fisher.unitary_mixing_channel(ancilla, 0.6),
    ],
    ids=["convex", "unitary"],
)
def test_relative_entropy_does_not_grow_under_channels(make_channel, space12):
    rho = fock.random_state(space12, 21, regularize=1e-2)
    sigma = fock.random_state(space12, 22, regularize=1e-2)
    channel = make_channel(fock.make_thermal(space12, 0.5, budget=None))

    before = fock.relative_entropy(rho, sigma)
    after = fock.relative_entropy(channel(rho), channel(sigma))

    assert 0 <= after <= before + 1e-9
