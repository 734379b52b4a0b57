from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qepi.errors import DomainError, RankDeficient, StepTooLarge
from qepi.services import fisher, fock
from qepi.services.phase_space import GaussianState
from tests.property.settings import QUICK_SETTINGS

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _random(seed: int, cutoff: int = 10, rank: int | None = None) -> fock.DensityMatrix:
    return fock.random_state(fock.fock_space(1, cutoff), seed, rank, regularize=1e-3)


def test_thermal_closed_form():
    assert fisher.thermal_directional_fisher(1.0) == pytest.approx(math.log(2))
    assert math.isinf(fisher.thermal_directional_fisher(0.0))
    with pytest.raises(DomainError):
        fisher.thermal_directional_fisher(-1.0)


@pytest.mark.parametrize("N", [0.5, 1.0, 2.0])
def test_truncated_thermal_reproduces_closed_form(N):
    report = fisher.check_thermal_fisher(N)

    assert report.passed, report.diagnostics


@pytest.mark.parametrize("N", [0.5, 2.0])
def test_gaussian_fisher_of_thermal_state(N):
    assert fisher.fisher_total(GaussianState.thermal(N)) == pytest.approx(
        2 * math.log((N + 1) / N)
    )


def test_gaussian_fisher_is_undefined_for_pure_states():
    with pytest.raises(RankDeficient):
        fisher.fisher_total(GaussianState.vacuum())


def test_pure_fock_state_is_rank_deficient():
    with pytest.raises(RankDeficient):
        fisher.fisher_total(fock.make_fock(fock.fock_space(1, 10), 1))


def test_regularized_state_is_full_rank():
    rho = fisher.regularize(fock.make_fock(fock.fock_space(1, 10), 1))

    fisher.require_full_rank(rho)
    assert fisher.rank_floor(rho) > fisher.RANK_FLOOR


@given(seed=seeds, direction=st.sampled_from([0, 1]))
@QUICK_SETTINGS
def test_commutator_matches_finite_differences(seed, direction):
    report = fisher.check_fisher_oracle(_random(seed), direction)

    assert report.passed, report.diagnostics


def test_fisher_vector_sums_to_total(full_rank_state):
    vector = fisher.fisher_vector(full_rank_state)

    assert vector.shape == (2,)
    assert vector.min() > 0
    assert fisher.fisher_total(full_rank_state) == pytest.approx(vector.sum())


def test_first_difference_vanishes_at_the_minimum(full_rank_state):
    assert abs(fisher.fisher_first_difference(full_rank_state, 0)) < 1e-4


def test_step_outside_range_is_rejected(full_rank_state):
    with pytest.raises(DomainError):
        fisher.fisher_directional_fd(full_rank_state, 0, h=0.5)


def test_step_pushing_mass_to_the_top_level_is_refused():
    rho = fock.make_thermal(fock.fock_space(1, 12), 1.0, budget=None)

    with pytest.raises(StepTooLarge):
        fisher.fisher_directional_fd(rho, 0, h=0.1, budget=1e-12)


def test_reparametrization_scales_quadratically(full_rank_state):
    report = fisher.check_reparametrization(full_rank_state, 1, 1.7)

    assert report.passed, report.diagnostics
    assert report.diagnostics["ratio"] == pytest.approx(1.7**2, rel=1e-3)


@pytest.mark.parametrize(
    "make_channel",
    [
        lambda ancilla: fisher.IdentityChannel(),
        lambda ancilla: fisher.ReplacementChannel(ancilla),
        lambda ancilla: fisher.ConvexMixingChannel(ancilla, 0.4),
        lambda ancilla: fisher.beamsplitter_with_ancilla(ancilla, 0.6),
        lambda ancilla: fisher.unitary_mixing_channel(ancilla, 0.6),
    ],
    ids=["identity", "replacement", "convex", "beamsplitter", "unitary"],
)
def test_data_processing(make_channel, full_rank_state):
    channel = make_channel(_random(99, cutoff=full_rank_state.cutoff))

    report = fisher.check_data_processing(full_rank_state, 0, channel)

    assert report.passed, report.diagnostics


def test_identity_channel_preserves_fisher_information(full_rank_state):
    report = fisher.check_data_processing(full_rank_state, 1, fisher.IdentityChannel())

    assert report.margin == pytest.approx(0.0, abs=1e-9)


def test_convexity_and_stam_on_random_pairs():
    x, y = _random(3), _random(4)

    assert fisher.check_convexity(x, y, 0.3).passed
    assert fisher.check_stam(x, y).passed
    assert fisher.check_weighted_fisher(x, y, 0.3, 1.2, 0.4).passed


def test_stam_for_thermal_gaussian_pair(thermal_pair):
    report = fisher.check_stam(*thermal_pair)

    assert report.passed, report.diagnostics


def test_fisher_information_adds_over_modes():
    space = fock.fock_space(1, 6)
    a = fock.random_state(space, 5, regularize=1e-2)
    b = fock.random_state(space, 6, regularize=1e-2)

    report = fisher.check_fisher_additivity(a, b)

    assert report.passed, report.diagnostics


def test_additivity_refuses_products_below_the_rank_floor():
    with pytest.raises(RankDeficient):
        fisher.check_fisher_additivity(_random(5, cutoff=8), _random(6, cutoff=8))


def test_second_difference_keeps_the_value_at_zero():
    curvature = fisher._second_difference(lambda s: 3.0 + 2.0 * s**2 + s**4, 0.1)

    assert curvature == pytest.approx(4.0)


def test_translation_compatibility():
    report = fisher.check_translation_compatibility(
        _random(11), _random(12), 0.3, 0.8, 1.5, 0.1, 1
    )

    assert report.passed, report.diagnostics


def test_translation_family_shifts_first_moments(full_rank_state):
    family = fisher.TranslationFamily(fock.embed(full_rank_state, 24), 0)
    d0, _ = fock.moments(family.base)
    d1, _ = fock.moments(family.at(0.3))

    np.testing.assert_allclose(abs(d1[0] - d0[0]), 0.3, atol=1e-6)
    assert d1[1] == pytest.approx(d0[1], abs=1e-6)
