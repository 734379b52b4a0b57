from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qepi.errors import DomainError, StiffnessFailure, TruncationBudgetExceeded
from qepi.services import diffusion, fock
from qepi.services.diffusion import DiffusionRun
from qepi.services.phase_space import GaussianState
from tests.property.settings import SLOW_SETTINGS


@pytest.fixture
def single_photon() -> fock.DensityMatrix:
    return fock.make_fock(fock.fock_space(1, 8), 1)


def test_gaussian_diffusion_adds_noise():
    state = GaussianState.coherent(0.5 + 1j)
    evolved = diffusion.diffuse(state, 1.5)

    np.testing.assert_allclose(evolved.d, state.d)
    np.testing.assert_allclose(evolved.gamma, 2.5 * np.eye(2))


def test_negative_time_is_rejected(single_photon):
    with pytest.raises(DomainError):
        diffusion.diffuse(GaussianState.vacuum(), -0.1)
    with pytest.raises(DomainError):
        diffusion.evolve_ode(single_photon, -0.1)


def test_required_cutoff_grows_with_time(single_photon):
    short = diffusion.required_cutoff(single_photon, 0.1)
    long = diffusion.required_cutoff(single_photon, 2.0)

    assert single_photon.cutoff <= short < long
    assert diffusion.required_cutoff(single_photon, 0.0) == single_photon.cutoff


def test_explicit_cutoff_below_requirement_is_refused(single_photon):
    with pytest.raises(TruncationBudgetExceeded):
        diffusion.evolve_ode(single_photon, 1.0, cutoff=single_photon.cutoff)


def test_horizon_is_finite_only_on_fock_backend(single_photon):
    assert math.isinf(diffusion.horizon(GaussianState.vacuum()))
    limit = diffusion.horizon(single_photon)
    assert 0 < limit < math.inf
    assert diffusion.required_cutoff(single_photon, 0.9 * limit) <= diffusion.max_cutoff(1)


def test_thermal_state_stays_thermal():
    start = fock.make_thermal(fock.fock_space(1, 30), 0.5, budget=None)
    evolved = diffusion.evolve_ode(start, 1.0)
    expected = fock.make_thermal(evolved.space, 1.0, budget=None)

    assert fock.trace_distance(evolved, expected) < 1e-6


def test_covariance_rule(single_photon):
    report = diffusion.check_covariance_rule(single_photon, 0.5)

    assert report.passed, report.diagnostics


def test_ode_and_random_displacement_agree(single_photon):
    report = diffusion.check_method_agreement(single_photon, 0.5)

    assert report.passed, report.diagnostics


def test_entropy_increases_along_trajectory(single_photon):
    run = DiffusionRun(single_photon, (0.0, 0.25, 0.5, 1.0))
    entropies = run.entropies()

    assert entropies[0] == pytest.approx(0.0, abs=1e-9)
    assert all(b >= a - 1e-9 for a, b in zip(entropies, entropies[1:]))
    assert len(run.snapshots()) == 4
    assert diffusion.check_entropy_monotone(single_photon, run.times).passed


def test_diffusion_run_rejects_unsorted_times(single_photon):
    with pytest.raises(DomainError):
        DiffusionRun(single_photon, (0.5, 0.25))


def test_gaussification_commutes_with_diffusion(single_photon):
    assert diffusion.check_gaussian_map(single_photon, 0.5).passed


@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
@SLOW_SETTINGS
def test_beamsplitter_compatibility_on_random_states(seed):
    space = fock.fock_space(1, 8)
    x = fock.random_state(space, seed, support=3, regularize=1e-3)
    y = fock.random_state(space, seed + 1, support=3, regularize=1e-3)

    report = diffusion.check_beamsplitter_compatibility(x, y, 0.5, 0.1, 0.25)

    assert report.passed, report.diagnostics


def test_beamsplitter_compatibility_is_exact_for_gaussian_states():
    report = diffusion.check_beamsplitter_compatibility(
        GaussianState.thermal(0.5), GaussianState.coherent(1.0), 0.3, 1.0, 2.0
    )

    assert report.diagnostics["distance"] == pytest.approx(0.0, abs=1e-12)


def test_scaling_bounds_need_large_times():
    with pytest.raises(DomainError):
        diffusion.check_scaling_bounds(GaussianState.vacuum(), 0.5)


def test_scaling_upper_bound_is_saturated_by_gaussian_states():
    report = diffusion.check_scaling_bounds(GaussianState.thermal(1.0), 3.0)

    assert report.normative
    assert report.passed
    assert report.diagnostics["upper_slack"] == pytest.approx(0.0, abs=1e-4)


def test_scaling_bounds_between_one_and_two_are_not_normative():
    report = diffusion.check_scaling_bounds(GaussianState.vacuum(), 1.5)

    assert not report.normative
    assert "lower" not in report.diagnostics


def test_scaling_bounds_for_single_photon():
    report = diffusion.check_scaling_bounds(fock.make_fock(fock.fock_space(1, 8), 2), 2.5)

    assert report.passed, report.diagnostics


def test_gaussian_asymptotics():
    report = diffusion.check_asymptotics(GaussianState.thermal(1.0), (2.0, 4.0, 8.0))

    assert report.passed, report.diagnostics
    assert report.diagnostics["gap_8"] == 0.0


def test_two_half_steps_equal_one_full_step(single_photon):
    halves = diffusion.evolve_ode(diffusion.evolve_ode(single_photon, 0.5), 0.5)
    full = diffusion.evolve_ode(single_photon, 1.0)

    assert fock.trace_distance(halves, full) < 1e-6


def test_squeezed_state_needs_the_diffused_covariance_for_the_upper_bound():
    report = diffusion.check_scaling_bounds(GaussianState.squeezed(0.8), 3.0)

    assert report.passed, report.diagnostics
    assert report.diagnostics["upper_slack"] == pytest.approx(0.0, abs=1e-9)
    assert report.diagnostics["isotropic_upper_slack"] < -0.2


def test_lindblad_generator_is_traceless_and_hermitian(single_photon):
    generated = diffusion.lindblad_rhs(single_photon)

    assert abs(np.trace(generated)) < 1e-12
    np.testing.assert_allclose(generated, generated.conj().T, atol=1e-12)


def test_gaussification_gap_shrinks_along_diffusion(single_photon):
    early = diffusion.gaussification_gap(single_photon, 0.25)
    late = diffusion.gaussification_gap(single_photon, 1.0)

    assert 2 * math.log(2) > early > late > 0
    assert diffusion.gaussification_gap(GaussianState.thermal(1.0), 1.0) == 0.0


def test_collapsing_step_size_is_a_stiffness_failure(single_photon):
    with pytest.raises(StiffnessFailure):
        diffusion.evolve_ode_trajectory(single_photon, [0.5, 1.0], min_step=0.5)


def test_trajectory_snapshot_at_zero_is_the_embedded_start(single_photon):
    start, later = diffusion.evolve_ode_trajectory(single_photon, [0.0, 0.5])

    assert start.cutoff == later.cutoff
    assert fock.trace_distance(start, fock.embed(single_photon, start.cutoff)) < 1e-12
    assert fock.trace_distance(later, diffusion.evolve_ode(single_photon, 0.5)) < 1e-6


def test_scaling_bounds_at_two_are_not_normative():
    report = diffusion.check_scaling_bounds(GaussianState.thermal(1.0), 2.0)

    assert not report.normative
    assert report.passed
