from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qepi.errors import DomainError
from qepi.services import ensembles, epi, fock
from qepi.services.phase_space import GaussianState
from tests.property.settings import STANDARD_SETTINGS

seeds = st.integers(min_value=0, max_value=2**32 - 1)
lambdas = st.floats(min_value=0.05, max_value=0.95)


@given(seed=seeds, lam=lambdas)
@STANDARD_SETTINGS
def test_entropy_inequality_for_gaussian_pairs(seed, lam):
    x, y = ensembles.random_gaussian_pair(np.random.Generator(np.random.Philox(seed)))

    report = epi.qepi_prime_check(x, y, lam)

    assert report.passed, report.diagnostics
    assert report.inputs["lambda"] == lam


@given(seed=seeds)
@STANDARD_SETTINGS
def test_entropy_power_inequality_for_gaussian_pairs(seed):
    x, y = ensembles.random_gaussian_pair(np.random.Generator(np.random.Philox(seed)))

    assert epi.qepi_power_check(x, y).passed


def test_inequalities_for_single_photon_and_thermal_state():
    space = fock.fock_space(1, 12)
    x = fock.make_fock(space, 1)
    y = fock.make_thermal(space, 1.0, budget=None)

    prime = epi.qepi_prime_check(x, y, 0.5)
    power = epi.qepi_power_check(x, y)

    assert prime.passed, prime.diagnostics
    assert power.passed, power.diagnostics
    assert prime.diagnostics["S_x"] == pytest.approx(0.0, abs=1e-9)


def test_identical_thermal_states_saturate_the_power_inequality():
    state = GaussianState.thermal(1.0)

    report = epi.qepi_power_check(state, state)

    assert report.margin == pytest.approx(0.0, abs=1e-12)


def test_general_lambda_power_check_is_informational(thermal_pair):
    report = epi.entropy_power_check(*thermal_pair, 0.3)

    assert not report.normative
    assert report.name == "entropy_power_concavity"


@pytest.mark.parametrize("N, t", [(0.5, 0.5), (1.0, 1.0), (2.0, 2.0)])
def test_de_bruijn_identity_for_thermal_states(N, t):
    report = epi.de_bruijn_residual(GaussianState.thermal(N), t)

    assert report.passed, report.diagnostics
    assert -report.margin < 1e-5


def test_de_bruijn_rejects_small_times_and_steps():
    state = GaussianState.thermal(1.0)

    with pytest.raises(DomainError):
        epi.de_bruijn_residual(state, 0.01)
    with pytest.raises(DomainError):
        epi.de_bruijn_residual(state, 1.0, h=0.1)


def test_delta_decreases_along_diffusion(thermal_pair):
    report = epi.delta_monotonicity_trace(*thermal_pair, 0.5, [0.0, 0.5, 1.0, 2.0])

    assert report.passed, report.diagnostics
    deltas = [report.diagnostics[f"delta_{t:g}"] for t in (0.0, 0.5, 1.0, 2.0)]
    assert deltas[0] > deltas[-1] >= 0


def test_delta_trace_needs_increasing_times(thermal_pair):
    with pytest.raises(DomainError):
        epi.delta_monotonicity_trace(*thermal_pair, 0.5, [1.0, 0.5])


def test_blachman_replay_of_identical_states_stays_at_one():
    state = GaussianState.thermal(1.0)

    trace, report = epi.blachman_replay(state, state, 1.0, points=5)

    assert report.passed, report.diagnostics
    np.testing.assert_allclose(trace.delta, 1.0, atol=1e-5)
    np.testing.assert_allclose(trace.F, trace.G)


def test_blachman_replay_of_distinct_thermal_states(thermal_pair):
    trace, report = epi.blachman_replay(*thermal_pair, 2.0)

    assert report.passed, report.diagnostics
    assert trace.delta[0] <= 1.0
    assert len(trace.t_grid) == 9
    assert all(slack is None or slack >= -1e-9 for slack in trace.stam_slack)


def test_blachman_replay_needs_positive_horizon(thermal_pair):
    with pytest.raises(DomainError):
        epi.blachman_replay(*thermal_pair, 0.0)


def test_blachman_replay_in_fock_space():
    space = fock.fock_space(1, 12)
    x = fock.make_fock(space, 1)
    y = fock.make_thermal(space, 1.0, budget=None)

    trace, report = epi.blachman_replay(x, y, 0.5, points=3)

    assert report.passed, report.diagnostics
    assert trace.delta[0] <= 1.0
    assert report.inputs["tail_mass_x"] == pytest.approx(0.0)
