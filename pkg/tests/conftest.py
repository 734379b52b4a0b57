from __future__ import annotations

import numpy as np
import pytest

from qepi.services import fock
from qepi.services.phase_space import GaussianState


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.Philox(1234))


@pytest.fixture
def space12() -> fock.FockSpace:
    return fock.fock_space(1, 12)


@pytest.fixture
def thermal_pair() -> tuple[GaussianState, GaussianState]:
    return GaussianState.thermal(0.5), GaussianState.thermal(2.0)


@pytest.fixture
def full_rank_state(space12) -> fock.DensityMatrix:
    """Rank-3 random state mixed with thermal(0.5)."""

    return fock.random_state(space12, 7, 3, regularize=1e-3)
