"""Divergence-based quantum Fisher information along phase-space translations.

For a covariant family ρ^(θ) = e^{iθH} ρ e^{-iθH} the Fisher information is the
second derivative of θ ↦ S(ρ‖ρ^(θ)) at 0, which equals tr(ρ[H, [H, log ρ]]).
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property, singledispatch
from typing import Callable

import numpy as np

from qepi.config import (
    EPS_CLAMP,
    FD_STEP,
    FD_STEP_RANGE,
    FISHER_REGULARIZATION,
    FISHER_REL_TOL,
    FISHER_TOL,
    RANK_BLOCK_LEVELS,
    RANK_FLOOR,
    REGULARIZER_PHOTONS,
    SYMPLECTIC_FLOOR,
    THERMAL_ORACLE_CUTOFF,
    THERMAL_ORACLE_TOL,
    TRUNCATION_BUDGET,
)
from qepi.errors import DimensionMismatch, DomainError, RankDeficient, StepTooLarge
from qepi.models.dto import CheckReport
from qepi.services import backends, fock
from qepi.services.fock import Budget, DensityMatrix
from qepi.services.phase_space import GaussianState, symplectic_eigenvalues, symplectic_form

LOGGER = logging.getLogger(__name__)

IMAGINARY_TOL = 1e-9
NEGATIVITY_TOL = 1e-8


def regularize(
    rho: DensityMatrix, eps: float = FISHER_REGULARIZATION, photons: float = REGULARIZER_PHOTONS
) -> DensityMatrix:
    """(1-ε)ρ + ε·thermal(0.5), full rank on every finite block."""

    return fock.regularize_state(rho, eps, photons)


def thermal_directional_fisher(N: float) -> float:
    """β = log((N+1)/N), the Fisher information of thermal(N) in any direction."""

    if N < 0:
        raise DomainError(f"mean photon number must be non-negative, got {N}")
    return float(np.inf) if N == 0 else float(np.log((N + 1) / N))


def rank_floor(rho: DensityMatrix, levels: int = RANK_BLOCK_LEVELS) -> float:
    """Smallest eigenvalue of ρ compressed to the low-photon block."""

    block = rho.space.low_block(levels)
    return float(np.linalg.eigvalsh(rho.mat[np.ix_(block, block)]).min())


def require_full_rank(rho: DensityMatrix, floor: float = RANK_FLOOR) -> None:
    smallest = rank_floor(rho)
    if smallest < floor:
        raise RankDeficient(
            f"{rho.label}: smallest low-block eigenvalue {smallest:.3e} below {floor:.1e}; "
            "regularize the state first"
        )


@dataclass(frozen=True, eq=False)
class TranslationFamily:
    """ρ^(θ) = e^{iθcH} ρ e^{-iθcH} with H = (JR)_direction and speed c."""

    base: DensityMatrix
    direction: int
    speed: float = 1.0

    @cached_property
    def generator(self) -> np.ndarray:
        return self.base.space.translation_generator(self.direction)

    @cached_property
    def _eigh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.generator)

    def unitary(self, theta: float) -> np.ndarray:
        w, V = self._eigh
        return (V * np.exp(1j * self.speed * theta * w)) @ V.conj().T

    def at(self, theta: float) -> DensityMatrix:
        return fock.apply_unitary(self.base, self.unitary(theta))

    def shifted(self, theta0: float) -> "TranslationFamily":
        """The same family re-based at ρ^(θ0)."""

        return TranslationFamily(self.at(theta0), self.direction, self.speed)


def _log_and_check(rho: DensityMatrix, eps: float) -> np.ndarray:
    require_full_rank(rho)
    return fock.log_matrix(rho, eps)


def _directional(rho: DensityMatrix, H: np.ndarray, log_rho: np.ndarray, direction: int) -> float:
    # tr(ρ[H,[H,L]]) = tr([ρ,H][H,L])
    rho_mat = np.asarray(rho.mat)
    value = complex(np.einsum("ij,ji->", rho_mat @ H - H @ rho_mat, H @ log_rho - log_rho @ H))
    if abs(value.imag) > IMAGINARY_TOL * max(1.0, abs(value.real)):
        LOGGER.warning(
            "imaginary residue %.3e in Fisher information of %s", value.imag, rho.label
        )
    if value.real < -NEGATIVITY_TOL:
        LOGGER.warning(
            "negative Fisher information %.3e for %s direction %d",
            value.real,
            rho.label,
            direction,
        )
    return value.real


def fisher_vector(rho: DensityMatrix, *, eps: float = EPS_CLAMP) -> np.ndarray:
    """All 2n directional Fisher values from one eigendecomposition of ρ."""

    log_rho = _log_and_check(rho, eps)
    return np.array(
        [
            _directional(rho, rho.space.translation_generator(k), log_rho, k)
            for k in range(2 * rho.n)
        ]
    )


def fisher_directional_commutator(
    rho: DensityMatrix, direction: int, *, eps: float = EPS_CLAMP
) -> float:
    log_rho = _log_and_check(rho, eps)
    return _directional(rho, rho.space.translation_generator(direction), log_rho, direction)


def gaussian_fisher_vector(state: GaussianState) -> np.ndarray:
    """Diagonal of the Gibbs matrix M = 2iJ arccoth(iγJ), where ρ ∝ exp(-RᵀMR/2)."""

    nus = symplectic_eigenvalues(state.gamma)
    if nus.min() <= 1 + SYMPLECTIC_FLOOR:
        raise RankDeficient(f"{state.label}: pure symplectic component, ν = {nus.min():.3e}")
    J = symplectic_form(state.n)
    w, V = np.linalg.eig(1j * state.gamma @ J)
    w = w.real
    arccoth = 0.5 * np.log((w + 1) / (w - 1))
    M = 2j * J @ (V * arccoth) @ np.linalg.inv(V)
    return np.diag(M).real.copy()


@singledispatch
def fisher_total(state) -> float:
    """J(ρ) = Σ_k J along every quadrature direction."""

    raise TypeError(f"unsupported state type {type(state).__name__}")


@fisher_total.register
def _(state: DensityMatrix) -> float:
    return float(fisher_vector(state).sum())


@fisher_total.register
def _(state: GaussianState) -> float:
    return float(gaussian_fisher_vector(state).sum())


# Finite-difference oracle


def _check_step(h: float) -> None:
    low, high = FD_STEP_RANGE
    if not low <= h <= high:
        raise DomainError(f"finite-difference step {h} outside [{low}, {high}]")


def _second_difference(divergence: Callable[[float], float], h: float) -> float:
    at_zero = divergence(0.0)

    def central(step: float) -> float:
        return (divergence(step) - 2 * at_zero + divergence(-step)) / step**2

    return (4 * central(h / 2) - central(h)) / 3


def family_fisher_fd(
    rho0: DensityMatrix,
    states_at: Callable[[float], DensityMatrix],
    h: float = FD_STEP,
) -> float:
    """Richardson-extrapolated second difference of θ ↦ S(ρ0‖ρ(θ)) at 0."""

    _check_step(h)
    return float(_second_difference(lambda theta: fock.relative_entropy(rho0, states_at(theta)), h))


def _family_divergence(
    family: TranslationFamily, eps: float, budget: Budget
) -> Callable[[float], float]:
    rho = family.base
    log_rho = fock.log_matrix(rho, eps)
    base_term = rho.expectation(log_rho).real
    base_tail = rho.tail_mass

    def divergence(theta: float) -> float:
        U = family.unitary(theta)
        if budget is not None:
            moved = family.at(theta)
            if moved.tail_mass > base_tail + budget:
                raise StepTooLarge(
                    f"{rho.label}: step {theta} raises the top-level population to "
                    f"{moved.tail_mass:.3e}"
                )
        return base_term - rho.expectation(U @ log_rho @ U.conj().T).real

    return divergence


def fisher_directional_fd(
    rho: DensityMatrix,
    direction: int,
    h: float = FD_STEP,
    *,
    eps: float = EPS_CLAMP,
    budget: Budget = TRUNCATION_BUDGET,
    speed: float = 1.0,
) -> float:
    """Second derivative of S(ρ‖ρ^(θ)) by central differences at h and h/2."""

    _check_step(h)
    require_full_rank(rho)
    family = TranslationFamily(rho, direction, speed)
    return float(_second_difference(_family_divergence(family, eps, budget), h))


def fisher_first_difference(
    rho: DensityMatrix,
    direction: int,
    h: float = FD_STEP,
    *,
    eps: float = EPS_CLAMP,
) -> float:
    """(S(ρ‖ρ^(h)) - S(ρ‖ρ^(-h)))/2h, which vanishes at the minimum θ = 0."""

    _check_step(h)
    divergence = _family_divergence(TranslationFamily(rho, direction), eps, None)
    return float((divergence(h) - divergence(-h)) / (2 * h))


def translate(
    rho: DensityMatrix, direction: int, theta: float, *, pad: int | None = None
) -> DensityMatrix:
    """e^{iθH}ρe^{-iθH} evaluated on a space padded by ``pad`` levels per mode."""

    pad = rho.cutoff if pad is None else pad
    padded = fock.embed(rho, rho.cutoff + pad)
    return TranslationFamily(padded, direction).at(theta)


# Channels for data processing


class FisherChannel(ABC):
    """A fixed CPTP map applied to every member of a family."""

    name: str = "channel"

    @abstractmethod
    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        ...


class IdentityChannel(FisherChannel):
    name = "identity"

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        return rho


@dataclass(frozen=True, eq=False)
class ReplacementChannel(FisherChannel):
    """Traces the input out and prepares ``state``."""

    state: DensityMatrix
    name: str = "replacement"

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        return self.state


@dataclass(frozen=True, eq=False)
class ConvexMixingChannel(FisherChannel):
    state: DensityMatrix
    weight: float
    name: str = "convex_mixing"

    def __post_init__(self) -> None:
        if not 0.0 <= self.weight <= 1.0:
            raise DomainError(f"mixing weight must lie in [0, 1], got {self.weight}")

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        rho, state = fock.align(rho, self.state)
        return fock.mix([rho, state], [1 - self.weight, self.weight])


@dataclass(frozen=True, eq=False)
class UnitaryMixingChannel(FisherChannel):
    """ρ ↦ tr_2 U(ρ⊗ancilla)U† for a unitary on the joint space."""

    ancilla: DensityMatrix
    unitary: np.ndarray
    name: str = "unitary_mixing"

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        if rho.space != self.ancilla.space:
            raise DimensionMismatch("input and ancilla must share one Fock space")
        joint = fock.apply_unitary(fock.tensor(rho, self.ancilla), self.unitary)
        return fock.partial_trace(joint, rho.n)


@dataclass(frozen=True, eq=False)
class BeamsplitterChannel(FisherChannel):
    """E_λ(ρ⊗ancilla) with the exact output cutoff."""

    ancilla: DensityMatrix
    lam: float
    name: str = "beamsplitter"

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        return backends.combine(rho, self.ancilla, self.lam, exact=True)


def beamsplitter_with_ancilla(ancilla: DensityMatrix, lam: float) -> BeamsplitterChannel:
    return BeamsplitterChannel(ancilla, lam)


def unitary_mixing_channel(ancilla: DensityMatrix, lam: float) -> UnitaryMixingChannel:
    """Partial trace after a truncated beamsplitter-type unitary with ``ancilla``."""

    joint = fock.fock_space(2 * ancilla.n, ancilla.cutoff)
    return UnitaryMixingChannel(ancilla, fock.beamsplitter_unitary(joint, lam))


# Checks


def _inputs(rho: DensityMatrix, **extra) -> dict:
    return {"state": rho.label, "cutoff": rho.cutoff, **extra}


def check_fisher_oracle(
    rho: DensityMatrix, direction: int, h: float = FD_STEP
) -> CheckReport:
    """Commutator formula against the finite-difference oracle."""

    commutator = fisher_directional_commutator(rho, direction)
    finite_difference = fisher_directional_fd(rho, direction, h, budget=None)
    gap = abs(commutator - finite_difference)
    return CheckReport.evaluate(
        "fisher_oracle",
        -gap,
        max(FISHER_REL_TOL * abs(commutator), FISHER_TOL),
        inputs=_inputs(rho, direction=direction, h=h),
        diagnostics={"commutator": commutator, "finite_difference": finite_difference},
    )


def check_thermal_fisher(
    N: float,
    direction: int = 0,
    cutoff: int = THERMAL_ORACLE_CUTOFF,
    *,
    tolerance: float = THERMAL_ORACLE_TOL,
) -> CheckReport:
    """Commutator formula on a truncated thermal state against β = log((N+1)/N)."""

    rho = fock.make_thermal(fock.fock_space(1, cutoff), N, budget=None)
    value = fisher_directional_commutator(rho, direction)
    expected = thermal_directional_fisher(N)
    return CheckReport.evaluate(
        "fisher_thermal_oracle",
        -abs(value - expected),
        tolerance,
        inputs=_inputs(rho, N=N, direction=direction),
        diagnostics={"commutator": value, "closed_form": expected},
    )


def check_reparametrization(
    rho: DensityMatrix, direction: int, c: float, h: float = FD_STEP
) -> CheckReport:
    """J(ρ^(cθ)) = c² J(ρ^(θ))."""

    base = fisher_directional_fd(rho, direction, h, budget=None)
    sped = fisher_directional_fd(rho, direction, h, budget=None, speed=c)
    expected = c**2 * base
    return CheckReport.evaluate(
        "reparametrization",
        -abs(sped - expected),
        max(FISHER_REL_TOL * expected, 1e-8),
        inputs=_inputs(rho, direction=direction, c=c, h=h),
        diagnostics={"base": base, "sped": sped, "ratio": sped / base if base else 0.0},
    )


def check_data_processing(
    rho: DensityMatrix,
    direction: int,
    channel: FisherChannel,
    h: float = FD_STEP,
    *,
    tolerance: float = FISHER_TOL,
) -> CheckReport:
    """J(E(ρ^(θ))) ≤ J(ρ^(θ)), both sides by finite differences."""

    require_full_rank(rho)
    family = TranslationFamily(rho, direction)
    before = family_fisher_fd(rho, family.at, h)
    processed = channel(rho)
    after = family_fisher_fd(processed, lambda theta: channel(family.at(theta)), h)
    return CheckReport.evaluate(
        "data_processing",
        before - after,
        tolerance,
        inputs=_inputs(rho, direction=direction, channel=channel.name, h=h),
        diagnostics={"input_fisher": before, "output_fisher": after},
    )


def _fisher_triplet(rho_x, rho_y, lam: float) -> tuple[float, float, float]:
    rho_z = backends.combine(rho_x, rho_y, lam)
    return fisher_total(rho_x), fisher_total(rho_y), fisher_total(rho_z)


def check_weighted_fisher(
    rho_x, rho_y, lam: float, w_x: float, w_y: float, *, tolerance: float = FISHER_TOL
) -> CheckReport:
    """w² J(E_λ(ρ_X⊗ρ_Y)) ≤ w_X² J(ρ_X) + w_Y² J(ρ_Y) with w = √λ w_X + √(1-λ) w_Y."""

    j_x, j_y, j_z = _fisher_triplet(rho_x, rho_y, lam)
    w = np.sqrt(lam) * w_x + np.sqrt(1 - lam) * w_y
    return CheckReport.evaluate(
        "weighted_fisher",
        w_x**2 * j_x + w_y**2 * j_y - w**2 * j_z,
        tolerance,
        inputs={"x": rho_x.label, "y": rho_y.label, "lambda": lam, "w_x": w_x, "w_y": w_y},
        diagnostics={"J_x": j_x, "J_y": j_y, "J_z": j_z},
    )


def check_convexity(rho_x, rho_y, lam: float, *, tolerance: float = FISHER_TOL) -> CheckReport:
    """J(E_λ(ρ_X⊗ρ_Y)) ≤ λJ(ρ_X) + (1-λ)J(ρ_Y)."""

    j_x, j_y, j_z = _fisher_triplet(rho_x, rho_y, lam)
    return CheckReport.evaluate(
        "convexity",
        lam * j_x + (1 - lam) * j_y - j_z,
        tolerance,
        inputs={"x": rho_x.label, "y": rho_y.label, "lambda": lam},
        diagnostics={"J_x": j_x, "J_y": j_y, "J_z": j_z},
    )


def check_stam(rho_x, rho_y, *, tolerance: float = FISHER_TOL) -> CheckReport:
    """2/J(E(ρ_X⊗ρ_Y)) ≥ 1/J(ρ_X) + 1/J(ρ_Y) for the 50:50 beamsplitter."""

    j_x, j_y, j_z = _fisher_triplet(rho_x, rho_y, 0.5)
    return CheckReport.evaluate(
        "stam",
        2 / j_z - 1 / j_x - 1 / j_y,
        tolerance,
        inputs={"x": rho_x.label, "y": rho_y.label},
        diagnostics={"J_x": j_x, "J_y": j_y, "J_z": j_z},
    )


def check_fisher_additivity(
    rho_a: DensityMatrix, rho_b: DensityMatrix, *, tolerance: float = FISHER_TOL
) -> CheckReport:
    """J(ρ_A⊗ρ_B) = J(ρ_A) + J(ρ_B).

    The product spectrum must stay above the rank floor, otherwise the log clamp
    would alter J(ρ_A⊗ρ_B) and the identity could not hold.
    """

    rho_a, rho_b = fock.align(rho_a, rho_b)
    product_floor = float(rho_a.spectrum.min() * rho_b.spectrum.min())
    if product_floor < RANK_FLOOR:
        raise RankDeficient(
            f"{rho_a.label}*{rho_b.label}: product eigenvalue {product_floor:.3e} "
            f"below {RANK_FLOOR:.1e}; regularize the factors more strongly"
        )
    j_a, j_b = fisher_total(rho_a), fisher_total(rho_b)
    j_ab = fisher_total(fock.tensor(rho_a, rho_b))
    return CheckReport.evaluate(
        "fisher_additivity",
        -abs(j_ab - j_a - j_b),
        tolerance,
        inputs={"a": rho_a.label, "b": rho_b.label, "cutoff": rho_a.cutoff},
        diagnostics={"J_a": j_a, "J_b": j_b, "J_ab": j_ab},
    )


def check_translation_compatibility(
    rho_x: DensityMatrix,
    rho_y: DensityMatrix,
    lam: float,
    w_x: float,
    w_y: float,
    theta: float,
    direction: int,
    *,
    tolerance: float = 1e-5,
) -> CheckReport:
    """E_λ(ρ_X^(w_Xθ)⊗ρ_Y^(w_Yθ)) = E_λ(ρ_X⊗ρ_Y)^(wθ) with w = √λ w_X + √(1-λ) w_Y."""

    rho_x, rho_y = fock.align(rho_x, rho_y)
    w = np.sqrt(lam) * w_x + np.sqrt(1 - lam) * w_y
    left = backends.combine(
        translate(rho_x, direction, w_x * theta),
        translate(rho_y, direction, w_y * theta),
        lam,
        exact=False,
    )
    combined = backends.combine(rho_x, rho_y, lam)
    right = translate(combined, direction, w * theta, pad=left.cutoff - combined.cutoff)
    distance = fock.trace_distance(left, right)
    return CheckReport.evaluate(
        "translation_compatibility",
        -distance,
        tolerance,
        inputs={
            "x": rho_x.label,
            "y": rho_y.label,
            "lambda": lam,
            "w_x": w_x,
            "w_y": w_y,
            "theta": theta,
            "direction": direction,
        },
        diagnostics={"distance": distance, "w": float(w)},
    )
