"""Seeded random ensembles and the fixed fixture states used by the suites."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TypeVar

import numpy as np

from qepi.config import FISHER_REGULARIZATION, RANDOM_SUPPORT_LEVELS
from qepi.services import fock, state_spec
from qepi.services.fisher import (
    ConvexMixingChannel,
    FisherChannel,
    IdentityChannel,
    ReplacementChannel,
    beamsplitter_with_ancilla,
    unitary_mixing_channel,
)
from qepi.services.fock import DensityMatrix
from qepi.services.phase_space import GaussianState, random_gaussian_state

T = TypeVar("T")

FIXTURE_SPECS: tuple[str, ...] = (
    "fock(0)",
    "fock(1)",
    "fock(2)",
    "fock(3)",
    "cat(1)",
    "cat(2)",
    "thermal(0.5)",
    "thermal(1)",
    "thermal(2)",
)
THERMAL_FIXTURES: tuple[float, ...] = (0.5, 1.0, 2.0)


@dataclass(frozen=True)
class WeightedItem:
    """A fixture value and its relative draw weight."""

    value: object
    weight: float = 1.0


def weighted_choice(options: Sequence[WeightedItem], rng: np.random.Generator):
    weights = np.array([max(option.weight, 0.0) for option in options])
    if not weights.any():
        weights = np.ones(len(options))
    index = rng.choice(len(options), p=weights / weights.sum())
    return options[int(index)].value


# Mode counts of random Gaussian pairs; larger registers are drawn less often.
GAUSSIAN_MODES = (
    WeightedItem(1, 1.0),
    WeightedItem(2, 1.0),
    WeightedItem(3, 0.5),
)

CHANNEL_KINDS = (
    WeightedItem("identity", 0.5),
    WeightedItem("replacement", 0.5),
    WeightedItem("convex_mixing", 1.0),
    WeightedItem("beamsplitter", 1.0),
    WeightedItem("unitary_mixing", 1.0),
)


def trial_generator(seed: int, suite_index: int, trial: int) -> np.random.Generator:
    """Counter-based generator for one trial; independent of execution order."""

    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([seed, suite_index, trial]))
    )


def derive_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


def fixture_states(cutoff: int, specs: Sequence[str] = FIXTURE_SPECS) -> dict[str, DensityMatrix]:
    """Single-mode fixtures at ``cutoff``, truncated without a budget check."""

    return {spec: state_spec.build_fock(spec, cutoff, budget=None) for spec in specs}


def random_gaussian_pair(
    rng: np.random.Generator, n: int | None = None
) -> tuple[GaussianState, GaussianState]:
    n = n or weighted_choice(GAUSSIAN_MODES, rng)
    return random_gaussian_state(n, rng), random_gaussian_state(n, rng)


def random_fock_state(
    rng: np.random.Generator,
    cutoff: int,
    *,
    n: int = 1,
    rank: int | None = None,
    support: int = RANDOM_SUPPORT_LEVELS,
    eps: float = FISHER_REGULARIZATION,
) -> DensityMatrix:
    """Random state on the low-photon block, mixed with thermal(0.5) for full rank."""

    space = fock.fock_space(n, cutoff)
    support = min(cutoff, support)
    rank = rank or int(rng.integers(1, support**n + 1))
    return fock.random_state(
        space, derive_seed(rng), rank, support=support, regularize=eps
    )


def random_fock_pair(
    rng: np.random.Generator,
    cutoff: int,
    *,
    support: int = RANDOM_SUPPORT_LEVELS,
    eps: float = FISHER_REGULARIZATION,
) -> tuple[DensityMatrix, DensityMatrix]:
    return tuple(
        random_fock_state(rng, cutoff, support=support, eps=eps) for _ in range(2)
    )


def random_channel(rng: np.random.Generator, cutoff: int) -> FisherChannel:
    """A single-mode channel drawn from the data-processing catalogue."""

    kind = weighted_choice(CHANNEL_KINDS, rng)
    if kind == "identity":
        return IdentityChannel()
    ancilla = random_fock_state(rng, cutoff)
    lam = float(rng.uniform(0.1, 0.9))
    if kind == "replacement":
        return ReplacementChannel(ancilla)
    if kind == "convex_mixing":
        return ConvexMixingChannel(ancilla, lam)
    if kind == "beamsplitter":
        return beamsplitter_with_ancilla(ancilla, lam)
    return unitary_mixing_channel(ancilla, lam)


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    """Symmetric positive definite 2n×2n matrix, not necessarily a valid covariance."""

    M = rng.normal(size=(2 * n, 2 * n))
    return M @ M.T + 0.1 * np.eye(2 * n)


def pick(rng: np.random.Generator, values: Sequence[T]) -> T:
    return values[int(rng.integers(0, len(values)))]
