"""Exact Gaussian phase-space calculus.

Quadratures are ordered R = (Q1, P1, ..., Qn, Pn) and the covariance matrix uses
the anticommutator convention, so the vacuum has γ = I (ħ-free units). All
entropies are in nats.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import block_diag
from scipy.special import xlogy

from qepi.config import (
    INEQUALITY_TOL,
    PAIRING_TOL,
    POSITIVE_DEFINITE_FLOOR,
    SYMPLECTIC_FLOOR,
    UNCERTAINTY_TOL,
)
from qepi.errors import (
    DimensionMismatch,
    DomainError,
    NonPositiveCovariance,
    PairingFailure,
    UncertaintyViolation,
)
from qepi.models.dto import CheckReport

LOGGER = logging.getLogger(__name__)

_OMEGA = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


def symplectic_form(n: int) -> np.ndarray:
    """Return the 2n×2n matrix J = ⊕ [[0, 1], [-1, 0]]."""

    if n < 1:
        raise DomainError(f"mode count must be positive, got {n}")
    return np.kron(np.eye(n), _OMEGA)


@dataclass(frozen=True)
class SymplecticForm:
    """The symplectic form on n modes."""

    n: int

    @cached_property
    def matrix(self) -> np.ndarray:
        matrix = symplectic_form(self.n)
        matrix.setflags(write=False)
        return matrix

    def is_antisymmetric(self) -> bool:
        return bool(np.array_equal(self.matrix.T, -self.matrix))

    def squares_to_minus_identity(self) -> bool:
        return bool(np.array_equal(self.matrix @ self.matrix, -np.eye(2 * self.n)))


def uncertainty_floor(gamma: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian matrix γ + iJ."""

    n = gamma.shape[0] // 2
    return float(np.linalg.eigvalsh(gamma + 1j * symplectic_form(n)).min())


@dataclass(frozen=True, eq=False)
class GaussianState:
    """First moments ``d`` and covariance matrix ``gamma`` of an n-mode Gaussian state."""

    d: np.ndarray
    gamma: np.ndarray
    label: str = field(default="gaussian", compare=False)

    def __post_init__(self) -> None:
        gamma = np.asarray(self.gamma, dtype=float)
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1] or gamma.shape[0] % 2:
            raise DimensionMismatch(f"covariance must be 2n×2n, got {gamma.shape}")
        if d.shape[0] != gamma.shape[0]:
            raise DimensionMismatch(
                f"first moments have length {d.shape[0]}, covariance is {gamma.shape}"
            )
        gamma = (gamma + gamma.T) / 2
        floor = uncertainty_floor(gamma)
        if floor < -UNCERTAINTY_TOL:
            raise UncertaintyViolation(f"min eig(γ + iJ) = {floor:.3e}")
        object.__setattr__(self, "gamma", _frozen(gamma))
        object.__setattr__(self, "d", _frozen(d))

    @property
    def n(self) -> int:
        return self.gamma.shape[0] // 2

    @classmethod
    def vacuum(cls, n: int = 1) -> "GaussianState":
        return cls(np.zeros(2 * n), np.eye(2 * n), label="vacuum")

    @classmethod
    def thermal(cls, N: float | list[float], n: int | None = None) -> "GaussianState":
        """Thermal state with mean photon number ``N`` per mode."""

        photons = np.atleast_1d(np.asarray(N, dtype=float))
        if n is not None and photons.size == 1:
            photons = np.full(n, photons[0])
        if np.any(photons < 0):
            raise DomainError(f"mean photon number must be non-negative, got {N}")
        gamma = np.diag(np.repeat(2 * photons + 1, 2))
        return cls(np.zeros(gamma.shape[0]), gamma, label=f"thermal({N})")

    @classmethod
    def coherent(cls, alpha: complex | list[complex]) -> "GaussianState":
        amplitudes = np.atleast_1d(np.asarray(alpha, dtype=complex))
        d = np.sqrt(2) * np.column_stack([amplitudes.real, amplitudes.imag]).reshape(-1)
        return cls(d, np.eye(d.size), label=f"coherent({alpha})")

    @classmethod
    def squeezed(cls, r: float, phi: float = 0.0) -> "GaussianState":
        S = phase_rotation_matrix(phi) @ squeezer_matrix(r)
        return cls(np.zeros(2), S @ S.T, label=f"squeezed({r},{phi})")


@dataclass(frozen=True, eq=False)
class GaussianChannel:
    """Gaussian channel acting as γ ↦ XγXᵀ + Y and d ↦ Xd + ξ."""

    X: np.ndarray
    Y: np.ndarray
    xi: np.ndarray

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        xi = np.asarray(self.xi, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] % 2 or X.shape[1] % 2:
            raise DimensionMismatch(f"X must be 2n_out×2n_in, got {X.shape}")
        if Y.shape != (X.shape[0], X.shape[0]) or xi.shape != (X.shape[0],):
            raise DimensionMismatch("Y and xi must match the output dimension of X")
        if not np.allclose(Y, Y.T, atol=1e-12):
            raise DomainError("Y must be symmetric")
        Y = (Y + Y.T) / 2
        J_out = symplectic_form(X.shape[0] // 2)
        J_in = symplectic_form(X.shape[1] // 2)
        floor = float(np.linalg.eigvalsh(Y + 1j * (J_out - X @ J_in @ X.T)).min())
        if floor < -UNCERTAINTY_TOL:
            raise DomainError(f"channel is not completely positive: min eig = {floor:.3e}")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "Y", _frozen(Y))
        object.__setattr__(self, "xi", _frozen(xi))

    @property
    def n_in(self) -> int:
        return self.X.shape[1] // 2

    @property
    def n_out(self) -> int:
        return self.X.shape[0] // 2

    def compose(self, first: "GaussianChannel") -> "GaussianChannel":
        """Return the channel applying ``first`` and then ``self``."""

        if first.n_out != self.n_in:
            raise DimensionMismatch(
                f"cannot compose {first.n_out}-mode output into {self.n_in}-mode input"
            )
        return GaussianChannel(
            self.X @ first.X,
            self.X @ first.Y @ self.X.T + self.Y,
            self.X @ first.xi + self.xi,
        )


def symplectic_eigenvalues(gamma: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of ``gamma``, sorted in descending order.

    They are the moduli of the ±iν eigenvalue pairs of Jγ.
    """

    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1] or gamma.shape[0] % 2:
        raise DimensionMismatch(f"covariance must be 2n×2n, got {gamma.shape}")
    gamma = (gamma + gamma.T) / 2
    if np.linalg.eigvalsh(gamma).min() <= POSITIVE_DEFINITE_FLOOR:
        raise NonPositiveCovariance("covariance matrix is not positive definite")

    n = gamma.shape[0] // 2
    eigenvalues = np.linalg.eigvals(symplectic_form(n) @ gamma)
    scale = max(1.0, float(np.abs(eigenvalues).max()))
    tol = PAIRING_TOL * scale
    if np.abs(eigenvalues.real).max() > tol:
        raise PairingFailure("eigenvalues of Jγ have non-vanishing real parts")

    upper = np.sort(eigenvalues.imag[eigenvalues.imag > 0])[::-1]
    lower = np.sort(-eigenvalues.imag[eigenvalues.imag < 0])[::-1]
    if upper.size != n or lower.size != n or np.abs(upper - lower).max() > tol:
        raise PairingFailure("eigenvalues of Jγ do not pair up as ±iν")
    return (upper + lower) / 2


def mean_photon(nu: float | np.ndarray) -> float | np.ndarray:
    """N(ν) = (ν - 1)/2."""

    values = np.asarray(nu, dtype=float)
    if np.any(values < 1 - SYMPLECTIC_FLOOR):
        raise DomainError(f"symplectic eigenvalue below 1: {nu}")
    photons = np.maximum((values - 1) / 2, 0.0)
    return float(photons) if photons.ndim == 0 else photons


def g(N: float | np.ndarray) -> float | np.ndarray:
    """g(N) = (N+1)log(N+1) - N log N in nats, with g(0) = 0."""

    values = np.asarray(N, dtype=float)
    if np.any(values < 0):
        raise DomainError(f"mean photon number must be non-negative: {N}")
    result = xlogy(values + 1, values + 1) - xlogy(values, values)
    return float(result) if result.ndim == 0 else result


def gaussian_entropy(state: GaussianState) -> float:
    """Von Neumann entropy of a Gaussian state; never reads ``state.d``."""

    nus = symplectic_eigenvalues(state.gamma)
    return float(np.sum(g(mean_photon(nus))))


def entropy_power(state: GaussianState) -> float:
    return float(np.exp(gaussian_entropy(state) / state.n))


def apply_channel(channel: GaussianChannel, state: GaussianState) -> GaussianState:
    if channel.n_in != state.n:
        raise DimensionMismatch(
            f"channel expects {channel.n_in} modes, state has {state.n}"
        )
    gamma = channel.X @ state.gamma @ channel.X.T + channel.Y
    d = channel.X @ state.d + channel.xi
    return GaussianState(d, gamma, label=state.label)


def product_state(first: GaussianState, second: GaussianState) -> GaussianState:
    """Direct sum of two registers, ``first`` occupying the leading modes."""

    return GaussianState(
        np.concatenate([first.d, second.d]),
        block_diag(first.gamma, second.gamma),
        label=f"{first.label}*{second.label}",
    )


def identity_channel(n: int) -> GaussianChannel:
    size = 2 * n
    return GaussianChannel(np.eye(size), np.zeros((size, size)), np.zeros(size))


def translation_channel(xi: np.ndarray) -> GaussianChannel:
    xi = np.asarray(xi, dtype=float).reshape(-1)
    size = xi.size
    return GaussianChannel(np.eye(size), np.zeros((size, size)), xi)


def beamsplitter_channel(lam: float, n: int = 1) -> GaussianChannel:
    """Transmissivity-λ beamsplitter from 2n modes (X register first) to n modes."""

    if not 0.0 < lam < 1.0:
        raise DomainError(f"transmissivity must lie in (0, 1), got {lam}")
    size = 2 * n
    X = np.hstack([np.sqrt(lam) * np.eye(size), np.sqrt(1 - lam) * np.eye(size)])
    return GaussianChannel(X, np.zeros((size, size)), np.zeros(size))


def diffusion_channel(t: float, n: int = 1) -> GaussianChannel:
    """Additive isotropic noise γ ↦ γ + tI."""

    if t < 0:
        raise DomainError(f"diffusion time must be non-negative, got {t}")
    size = 2 * n
    return GaussianChannel(np.eye(size), t * np.eye(size), np.zeros(size))


def phase_rotation_matrix(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [-s, c]])


def squeezer_matrix(r: float) -> np.ndarray:
    return np.diag([np.exp(-r), np.exp(r)])


def mode_mixer_matrix(n: int, j: int, k: int, theta: float) -> np.ndarray:
    """Orthogonal symplectic rotation mixing modes ``j`` and ``k``."""

    S = np.eye(2 * n)
    c, s = np.cos(theta), np.sin(theta)
    for offset in (0, 1):
        a, b = 2 * j + offset, 2 * k + offset
        S[a, a], S[a, b], S[b, a], S[b, b] = c, s, -s, c
    return S


def random_symplectic(
    n: int, rng: np.random.Generator, max_squeeze: float = 1.0
) -> np.ndarray:
    """Product of random single-mode and two-mode symplectic factors."""

    S = np.eye(2 * n)
    for _ in range(2):
        local = block_diag(
            *[
                phase_rotation_matrix(rng.uniform(0, 2 * np.pi))
                @ squeezer_matrix(rng.uniform(-max_squeeze, max_squeeze))
                @ phase_rotation_matrix(rng.uniform(0, 2 * np.pi))
                for _ in range(n)
            ]
        )
        S = local @ S
        for j in range(n):
            for k in range(j + 1, n):
                S = mode_mixer_matrix(n, j, k, rng.uniform(0, 2 * np.pi)) @ S
    return S


def random_gaussian_state(
    n: int,
    rng: np.random.Generator,
    nu_range: tuple[float, float] = (1.0, 5.0),
    max_squeeze: float = 1.0,
) -> GaussianState:
    """γ = S D Sᵀ with Williamson diagonal ν_k ~ U[nu_range] and random symplectic S."""

    nus = rng.uniform(*nu_range, size=n)
    S = random_symplectic(n, rng, max_squeeze)
    gamma = S @ np.diag(np.repeat(nus, 2)) @ S.T
    d = rng.normal(size=2 * n)
    return GaussianState(d, gamma, label=f"random_gaussian(n={n})")


def weak_submajorization_check(
    A: np.ndarray, B: np.ndarray, *, tolerance: float = INEQUALITY_TOL
) -> CheckReport:
    """Partial sums of the k smallest symplectic eigenvalues are superadditive.

    For every k, Σ_{j≤k} ν↑_j(A+B) ≥ Σ_{j≤k} (ν↑_j(A) + ν↑_j(B)). The opposite
    ordering of the largest partial sums fails for oppositely squeezed A and B;
    its slacks are recorded as ``largest_slack_k`` without entering the margin.
    """

    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes differ: {A.shape} vs {B.shape}")
    nu_a, nu_b = symplectic_eigenvalues(A), symplectic_eigenvalues(B)
    nu_sum = symplectic_eigenvalues(A + B)
    slacks = np.cumsum(nu_sum[::-1]) - np.cumsum((nu_a + nu_b)[::-1])
    largest = np.cumsum(nu_a + nu_b) - np.cumsum(nu_sum)
    diagnostics = {f"slack_{k + 1}": float(s) for k, s in enumerate(slacks)}
    diagnostics.update({f"largest_slack_{k + 1}": float(s) for k, s in enumerate(largest)})
    return CheckReport.evaluate(
        "weak_submajorization",
        float(slacks.min()),
        tolerance,
        inputs={"n": A.shape[0] // 2},
        diagnostics=diagnostics,
    )


def check_covariance_thermal_bound(
    gamma_a: np.ndarray, gamma_b: np.ndarray, *, tolerance: float = INEQUALITY_TOL
) -> CheckReport:
    """S(ρ[γ_A + γ_B]) ≥ S(ρ[⊕(ν^A_j + ν^B_j) I₂]) with both spectra in the same order.

    Follows from the superadditivity of the smallest partial sums, since ν ↦ g(N(ν))
    is increasing and concave.
    """

    summed = GaussianState(np.zeros(len(gamma_a)), np.asarray(gamma_a) + gamma_b)
    nus = symplectic_eigenvalues(gamma_a) + symplectic_eigenvalues(gamma_b)
    bound = float(np.sum(g(mean_photon(nus))))
    actual = gaussian_entropy(summed)
    return CheckReport.evaluate(
        "covariance_thermal_bound",
        actual - bound,
        tolerance,
        inputs={"n": summed.n},
        diagnostics={"entropy": actual, "bound": bound},
    )
