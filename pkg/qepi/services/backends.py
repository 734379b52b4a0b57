"""Backend dispatch: one set of entry points over Gaussian and Fock-space states."""

from __future__ import annotations

import logging
from functools import singledispatch
from typing import Union

import numpy as np

from qepi.config import TRUNCATION_BUDGET
from qepi.errors import DimensionMismatch
from qepi.services import fock
from qepi.services.fock import DensityMatrix
from qepi.services.phase_space import (
    GaussianState,
    apply_channel,
    beamsplitter_channel,
    gaussian_entropy,
    product_state,
)

LOGGER = logging.getLogger(__name__)

State = Union[GaussianState, DensityMatrix]


@singledispatch
def entropy(state) -> float:
    """Von Neumann entropy in nats."""

    raise TypeError(f"unsupported state type {type(state).__name__}")


@entropy.register
def _(state: GaussianState) -> float:
    return gaussian_entropy(state)


@entropy.register
def _(state: DensityMatrix) -> float:
    return fock.von_neumann_entropy(state)


@singledispatch
def mode_count(state) -> int:
    raise TypeError(f"unsupported state type {type(state).__name__}")


@mode_count.register
def _(state: GaussianState) -> int:
    return state.n


@mode_count.register
def _(state: DensityMatrix) -> int:
    return state.n


def entropy_power(state: State) -> float:
    """e^{S/n}."""

    return float(np.exp(entropy(state) / mode_count(state)))


@singledispatch
def moments(state) -> tuple[np.ndarray, np.ndarray]:
    """First moments and covariance matrix (d, γ)."""

    raise TypeError(f"unsupported state type {type(state).__name__}")


@moments.register
def _(state: GaussianState) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(state.d), np.asarray(state.gamma)


@moments.register
def _(state: DensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    return fock.moments(state)


@singledispatch
def combine(x, y, lam: float, *, exact: bool = True, budget: float | None = TRUNCATION_BUDGET):
    """E_λ(x⊗y) on the backend of ``x``.

    On the Fock backend ``exact`` keeps the full 2D-1 output cutoff so that no
    truncation enters the result; otherwise the output is cut to the input cutoff
    under ``budget``.
    """

    raise TypeError(f"unsupported state type {type(x).__name__}")


@combine.register
def _(x: GaussianState, y, lam: float, *, exact: bool = True, budget=TRUNCATION_BUDGET):
    if not isinstance(y, GaussianState) or x.n != y.n:
        raise DimensionMismatch("both inputs must be Gaussian states on equal mode counts")
    out = apply_channel(beamsplitter_channel(lam, x.n), product_state(x, y))
    return GaussianState(out.d, out.gamma, label=f"E_{lam}({x.label},{y.label})")


@combine.register
def _(x: DensityMatrix, y, lam: float, *, exact: bool = True, budget=TRUNCATION_BUDGET):
    if not isinstance(y, DensityMatrix):
        raise DimensionMismatch("both inputs must be density matrices")
    x, y = fock.align(x, y)
    output_cutoff = 2 * x.cutoff - 1 if exact else None
    return fock.beamsplitter_combine(
        x, y, lam, output_cutoff=output_cutoff, budget=None if exact else budget
    )


@singledispatch
def state_distance(first, second) -> float:
    """Trace distance for density matrices; max moment deviation for Gaussian states."""

    raise TypeError(f"unsupported state type {type(first).__name__}")


@state_distance.register
def _(first: GaussianState, second) -> float:
    if first.n != second.n:
        raise DimensionMismatch(f"mode counts differ: {first.n} vs {second.n}")
    return float(
        max(
            np.abs(first.d - second.d).max(),
            np.abs(first.gamma - second.gamma).max(),
        )
    )


@state_distance.register
def _(first: DensityMatrix, second) -> float:
    return fock.trace_distance(first, second)


def describe_backend(state: State) -> str:
    return "gaussian" if isinstance(state, GaussianState) else "fock"
