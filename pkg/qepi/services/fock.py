"""Truncated Fock-space engine for arbitrary (non-Gaussian) states.

Basis states of an n-mode space with cutoff D are |k_1 ... k_n⟩ with k_j < D,
mode 0 being the most significant index, so that mode operators are Kronecker
products in mode order. Quadratures follow the phase-space module: R = (Q1, P1, ...).
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import entr, gammaln

from qepi.config import (
    EPS_CLAMP,
    GAUSSIFY_UNCERTAINTY_TOL,
    PSD_TOL,
    SUPPORT_TOL,
    TRACE_TOL,
    TRUNCATION_BUDGET,
    UNCERTAINTY_TOL,
    RANDOM_SUPPORT_LEVELS,
)
from qepi.errors import (
    DimensionMismatch,
    DomainError,
    SupportMismatch,
    TruncationBudgetExceeded,
    UncertaintyViolation,
)
from qepi.models.dto import CheckReport
from qepi.services.phase_space import (
    GaussianState,
    gaussian_entropy,
    symplectic_form,
    uncertainty_floor,
)

LOGGER = logging.getLogger(__name__)

Budget = float | None


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _ladder(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)


@dataclass(frozen=True)
class FockSpace:
    """n bosonic modes truncated to ``cutoff`` levels each."""

    n: int
    cutoff: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError(f"mode count must be positive, got {self.n}")
        if self.cutoff < 2:
            raise DomainError(f"cutoff must be at least 2, got {self.cutoff}")

    @property
    def dim(self) -> int:
        return self.cutoff**self.n

    def _on_mode(self, op: np.ndarray, j: int) -> np.ndarray:
        left = np.eye(self.cutoff**j)
        right = np.eye(self.cutoff ** (self.n - j - 1))
        return np.kron(np.kron(left, op), right)

    @cached_property
    def annihilators(self) -> tuple[np.ndarray, ...]:
        a = _ladder(self.cutoff)
        return tuple(_readonly(self._on_mode(a, j)) for j in range(self.n))

    @cached_property
    def creators(self) -> tuple[np.ndarray, ...]:
        return tuple(_readonly(a.conj().T.copy()) for a in self.annihilators)

    @cached_property
    def quadratures(self) -> tuple[np.ndarray, ...]:
        """(Q1, P1, ..., Qn, Pn) as dense Hermitian matrices."""

        ops: list[np.ndarray] = []
        for a, ad in zip(self.annihilators, self.creators):
            ops.append(_readonly((a + ad) / np.sqrt(2)))
            ops.append(_readonly(-1j * (a - ad) / np.sqrt(2)))
        return tuple(ops)

    @cached_property
    def number_ops(self) -> tuple[np.ndarray, ...]:
        return tuple(_readonly(ad @ a) for a, ad in zip(self.annihilators, self.creators))

    @cached_property
    def occupations(self) -> np.ndarray:
        """Photon number of every basis state, shape (dim, n)."""

        grid = np.indices((self.cutoff,) * self.n).reshape(self.n, -1).T
        return _readonly(grid)

    def low_block(self, levels: int) -> np.ndarray:
        """Indices of basis states with every mode below ``levels`` photons."""

        levels = min(levels, self.cutoff)
        return np.flatnonzero(np.all(self.occupations < levels, axis=1))

    def translation_generator(self, k: int) -> np.ndarray:
        """(JR)_k: P_j for direction Q_j and -Q_j for direction P_j."""

        if not 0 <= k < 2 * self.n:
            raise DomainError(f"direction {k} outside 0..{2 * self.n - 1}")
        J = symplectic_form(self.n)
        return sum(J[k, l] * R for l, R in enumerate(self.quadratures) if J[k, l])


@lru_cache(maxsize=64)
def fock_space(n: int, cutoff: int) -> FockSpace:
    return FockSpace(n, cutoff)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated density matrix on a truncated Fock space."""

    space: FockSpace
    mat: np.ndarray
    label: str = field(default="state", compare=False)

    def __post_init__(self) -> None:
        mat = np.asarray(self.mat, dtype=complex)
        if mat.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatch(
                f"matrix shape {mat.shape} does not match space dimension {self.space.dim}"
            )
        mat = (mat + mat.conj().T) / 2
        trace = float(np.trace(mat).real)
        if abs(trace - 1) > TRACE_TOL:
            raise DomainError(f"trace {trace:.12f} differs from 1")
        object.__setattr__(self, "mat", _readonly(mat))
        if self.spectrum.min() < -PSD_TOL:
            raise DomainError(f"density matrix has eigenvalue {self.spectrum.min():.3e}")

    @classmethod
    def from_vector(
        cls, space: FockSpace, psi: np.ndarray, label: str = "pure"
    ) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(space, np.outer(psi, psi.conj()), label=label)

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def cutoff(self) -> int:
        return self.space.cutoff

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        w, V = np.linalg.eigh(self.mat)
        return _readonly(w), _readonly(V)

    @property
    def spectrum(self) -> np.ndarray:
        return self.eigh[0]

    @cached_property
    def populations(self) -> np.ndarray:
        return _readonly(np.clip(np.diag(self.mat).real, 0.0, None))

    @property
    def tail_masses(self) -> np.ndarray:
        """Population of the top Fock level of each mode."""

        top = self.space.occupations == self.cutoff - 1
        return np.array([self.populations[top[:, j]].sum() for j in range(self.n)])

    @property
    def tail_mass(self) -> float:
        return float(self.tail_masses.max())

    def mean_photons(self) -> np.ndarray:
        return self.populations @ self.space.occupations

    def check_budget(self, budget: Budget = TRUNCATION_BUDGET) -> "DensityMatrix":
        if budget is not None and self.tail_mass > budget:
            raise TruncationBudgetExceeded(
                f"{self.label}: top-level population {self.tail_mass:.3e} exceeds "
                f"budget {budget:.1e} at cutoff {self.cutoff}"
            )
        return self

    def expectation(self, op: np.ndarray) -> complex:
        return complex(np.einsum("ij,ji->", self.mat, op))


def _normalized(space: FockSpace, mat: np.ndarray, label: str) -> DensityMatrix:
    mat = (mat + mat.conj().T) / 2
    return DensityMatrix(space, mat / np.trace(mat).real, label=label)


def _per_mode(value, n: int, dtype=float) -> np.ndarray:
    values = np.atleast_1d(np.asarray(value, dtype=dtype))
    if values.size == 1:
        values = np.full(n, values[0], dtype=dtype)
    if values.size != n:
        raise DimensionMismatch(f"expected {n} per-mode values, got {values.size}")
    return values


def _kron_all(vectors: Sequence[np.ndarray]) -> np.ndarray:
    result = np.ones(1, dtype=vectors[0].dtype)
    for vector in vectors:
        result = np.kron(result, vector)
    return result


def make_vacuum(space: FockSpace) -> DensityMatrix:
    psi = np.zeros(space.dim, dtype=complex)
    psi[0] = 1.0
    return DensityMatrix.from_vector(space, psi, label="vacuum")


def make_thermal(
    space: FockSpace, N: float | Sequence[float], *, budget: Budget = TRUNCATION_BUDGET
) -> DensityMatrix:
    """Thermal state with populations ∝ (N/(N+1))^k per mode, renormalized."""

    photons = _per_mode(N, space.n)
    if np.any(photons < 0):
        raise DomainError(f"mean photon number must be non-negative, got {N}")
    levels = np.arange(space.cutoff)
    factors = []
    for photon in photons:
        weights = np.zeros(space.cutoff)
        if photon == 0:
            weights[0] = 1.0
        else:
            weights = np.exp(levels * np.log(photon / (photon + 1)))
        factors.append(weights / weights.sum())
    populations = _kron_all(factors)
    state = DensityMatrix(space, np.diag(populations), label=f"thermal({N})")
    return state.check_budget(budget)


def coherent_vector(cutoff: int, alpha: complex, *, normalize: bool = True) -> np.ndarray:
    """Fock amplitudes e^{-|α|²/2} α^k / √k! for k < cutoff."""

    k = np.arange(cutoff)
    if alpha == 0:
        psi = np.zeros(cutoff, dtype=complex)
        psi[0] = 1.0
        return psi
    log_mod = -abs(alpha) ** 2 / 2 + k * np.log(abs(alpha)) - gammaln(k + 1) / 2
    psi = np.exp(log_mod) * np.exp(1j * k * np.angle(alpha))
    return psi / np.linalg.norm(psi) if normalize else psi


def make_coherent(
    space: FockSpace,
    alpha: complex | Sequence[complex],
    *,
    budget: Budget = TRUNCATION_BUDGET,
) -> DensityMatrix:
    amplitudes = _per_mode(alpha, space.n, dtype=complex)
    psi = _kron_all([coherent_vector(space.cutoff, a) for a in amplitudes])
    label = f"coherent({alpha})"
    return DensityMatrix.from_vector(space, psi, label=label).check_budget(budget)


def make_fock(space: FockSpace, k: int | Sequence[int]) -> DensityMatrix:
    photons = _per_mode(k, space.n, dtype=int)
    if np.any(photons < 0) or np.any(photons >= space.cutoff):
        raise DomainError(f"photon number {k} outside 0..{space.cutoff - 1}")
    psi = np.zeros(space.dim, dtype=complex)
    psi[np.ravel_multi_index(tuple(photons), (space.cutoff,) * space.n)] = 1.0
    return DensityMatrix.from_vector(space, psi, label=f"fock({k})")


def make_cat(
    space: FockSpace,
    alpha: complex,
    phase: float = 0.0,
    *,
    budget: Budget = TRUNCATION_BUDGET,
) -> DensityMatrix:
    """(|α⟩ + e^{iφ}|-α⟩)/norm on every mode."""

    plus = coherent_vector(space.cutoff, alpha, normalize=False)
    minus = coherent_vector(space.cutoff, -alpha, normalize=False)
    single = plus + np.exp(1j * phase) * minus
    if np.linalg.norm(single) < 1e-12:
        raise DomainError(f"cat superposition with alpha={alpha}, phase={phase} vanishes")
    psi = _kron_all([single / np.linalg.norm(single)] * space.n)
    label = f"cat({alpha},{phase})"
    return DensityMatrix.from_vector(space, psi, label=label).check_budget(budget)


def random_state(
    space: FockSpace,
    seed: int | np.random.SeedSequence,
    rank: int | None = None,
    *,
    support: int | None = None,
    regularize: float = 0.0,
) -> DensityMatrix:
    """Haar-random rank-``rank`` state on the low-photon block, deterministic per seed.

    A Ginibre matrix G with ``rank`` columns gives ρ = GG†/tr(GG†), the reduction of
    a Haar-random purification.
    """

    rng = np.random.Generator(np.random.Philox(seed))
    levels = min(space.cutoff, support or RANDOM_SUPPORT_LEVELS)
    block = space.low_block(levels)
    rank = block.size if rank is None else rank
    while rank > block.size and levels < space.cutoff:
        levels += 1
        block = space.low_block(levels)
    if not 1 <= rank <= block.size:
        raise DomainError(f"rank {rank} outside 1..{space.dim}")
    G = rng.normal(size=(block.size, rank)) + 1j * rng.normal(size=(block.size, rank))
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    mat[np.ix_(block, block)] = G @ G.conj().T
    state = _normalized(space, mat, label=f"random({seed},{rank})")
    if regularize:
        state = regularize_state(state, regularize)
    return state


def regularize_state(
    rho: DensityMatrix, eps: float, photons: float = 0.5
) -> DensityMatrix:
    """(1-ε)ρ + ε·thermal(photons) on the same space."""

    if not 0.0 <= eps < 1.0:
        raise DomainError(f"mixing weight must lie in [0, 1), got {eps}")
    thermal = make_thermal(rho.space, photons, budget=None)
    return DensityMatrix(
        rho.space, (1 - eps) * rho.mat + eps * thermal.mat, label=rho.label
    )


def mix(states: Sequence[DensityMatrix], weights: Sequence[float]) -> DensityMatrix:
    weights = np.asarray(weights, dtype=float)
    if len(states) != weights.size or np.any(weights < 0) or weights.sum() <= 0:
        raise DomainError("mixing weights must be non-negative and match the states")
    space = states[0].space
    if any(state.space != space for state in states):
        raise DimensionMismatch("all mixed states must share one Fock space")
    mat = sum(w * state.mat for w, state in zip(weights / weights.sum(), states))
    return DensityMatrix(space, mat, label="mix")


def tensor(first: DensityMatrix, second: DensityMatrix) -> DensityMatrix:
    if first.cutoff != second.cutoff:
        raise DimensionMismatch(
            f"cutoffs differ: {first.cutoff} vs {second.cutoff}; embed first"
        )
    space = fock_space(first.n + second.n, first.cutoff)
    return DensityMatrix(
        space, np.kron(first.mat, second.mat), label=f"{first.label}*{second.label}"
    )


def _embedding_indices(n: int, small: int, large: int) -> np.ndarray:
    grid = np.indices((small,) * n).reshape(n, -1)
    return np.ravel_multi_index(tuple(grid), (large,) * n)


def embed(rho: DensityMatrix, cutoff: int) -> DensityMatrix:
    """Zero-pad ``rho`` into a space with a larger cutoff; lossless."""

    if cutoff < rho.cutoff:
        raise DomainError(f"cannot embed cutoff {rho.cutoff} into smaller {cutoff}")
    if cutoff == rho.cutoff:
        return rho
    space = fock_space(rho.n, cutoff)
    idx = _embedding_indices(rho.n, rho.cutoff, cutoff)
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    mat[np.ix_(idx, idx)] = rho.mat
    return DensityMatrix(space, mat, label=rho.label)


def compress(
    rho: DensityMatrix, cutoff: int, *, budget: Budget = TRUNCATION_BUDGET
) -> DensityMatrix:
    """Keep the levels below ``cutoff`` and renormalize; the discarded mass is budgeted."""

    if cutoff >= rho.cutoff:
        return embed(rho, cutoff)
    idx = _embedding_indices(rho.n, cutoff, rho.cutoff)
    kept = rho.mat[np.ix_(idx, idx)]
    discarded = 1.0 - float(np.trace(kept).real)
    if budget is not None and discarded > budget:
        raise TruncationBudgetExceeded(
            f"{rho.label}: compressing to cutoff {cutoff} discards {discarded:.3e}"
        )
    return _normalized(fock_space(rho.n, cutoff), kept, label=rho.label)


def align(*states: DensityMatrix) -> tuple[DensityMatrix, ...]:
    """Embed every state into the largest cutoff among them."""

    if len({state.n for state in states}) > 1:
        raise DimensionMismatch("states live on different mode counts")
    cutoff = max(state.cutoff for state in states)
    return tuple(embed(state, cutoff) for state in states)


def partial_trace(rho: DensityMatrix, keep: int) -> DensityMatrix:
    """Trace out every mode after the first ``keep``."""

    if not 1 <= keep < rho.n:
        raise DimensionMismatch(f"cannot keep {keep} of {rho.n} modes")
    D = rho.cutoff
    kept, traced = D**keep, D ** (rho.n - keep)
    reduced = np.einsum("ajbj->ab", rho.mat.reshape(kept, traced, kept, traced))
    return DensityMatrix(fock_space(keep, D), reduced, label=rho.label)


def unitary_from_generator(H: np.ndarray, theta: float = 1.0) -> np.ndarray:
    """e^{iθH} for Hermitian H through its eigendecomposition."""

    w, V = np.linalg.eigh((H + H.conj().T) / 2)
    return (V * np.exp(1j * theta * w)) @ V.conj().T


def apply_unitary(rho: DensityMatrix, U: np.ndarray, label: str | None = None) -> DensityMatrix:
    return DensityMatrix(rho.space, U @ rho.mat @ U.conj().T, label=label or rho.label)


def displacement_generator(space: FockSpace, xi: np.ndarray) -> np.ndarray:
    """ξ·JR as a Hermitian matrix."""

    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.size != 2 * space.n:
        raise DimensionMismatch(f"ξ must have length {2 * space.n}, got {xi.size}")
    coefficients = symplectic_form(space.n).T @ xi
    H = np.zeros((space.dim, space.dim), dtype=complex)
    for c, R in zip(coefficients, space.quadratures):
        if c:
            H += c * R
    return H


def displacement_op(space: FockSpace, xi: np.ndarray) -> np.ndarray:
    """D(ξ) = exp(iξ·JR), so that D(ξ) R_k D(ξ)† = R_k + ξ_k."""

    return unitary_from_generator(displacement_generator(space, xi))


def displace(
    rho: DensityMatrix, xi: np.ndarray, *, budget: Budget = TRUNCATION_BUDGET
) -> DensityMatrix:
    """D(ξ)† ρ D(ξ), which moves the first moments by +ξ."""

    U = displacement_op(rho.space, xi).conj().T
    return apply_unitary(rho, U).check_budget(budget)


def make_displaced_thermal(
    space: FockSpace,
    N: float,
    alpha: complex | Sequence[complex],
    *,
    budget: Budget = TRUNCATION_BUDGET,
) -> DensityMatrix:
    """Thermal state displaced to amplitude α, built on a padded space and compressed."""

    amplitudes = _per_mode(alpha, space.n, dtype=complex)
    xi = np.sqrt(2) * np.column_stack([amplitudes.real, amplitudes.imag]).reshape(-1)
    padded = fock_space(space.n, 2 * space.cutoff)
    thermal = make_thermal(padded, N, budget=None)
    shifted = displace(thermal, xi, budget=None)
    state = compress(shifted, space.cutoff, budget=budget)
    return DensityMatrix(space, state.mat, label=f"displaced_thermal({N},{alpha})")


def phase_rotation(rho: DensityMatrix, phi: float, mode: int | None = None) -> DensityMatrix:
    """Conjugate by e^{-iφ n̂} on one mode (or all modes), so a ↦ e^{-iφ} a."""

    modes = range(rho.n) if mode is None else [mode]
    photons = sum(rho.space.occupations[:, j] for j in modes)
    U = np.diag(np.exp(-1j * phi * photons))
    return apply_unitary(rho, U)


# Beamsplitter


def _sector_generator(m: int, ks: np.ndarray, theta: float) -> np.ndarray:
    """θ(a†b - ab†) on the states |k, m-k⟩, k in ``ks`` (consecutive)."""

    size = ks.size
    G = np.zeros((size, size))
    for i in range(size - 1):
        k = ks[i]
        amplitude = theta * np.sqrt((k + 1) * (m - k))
        G[i + 1, i] = amplitude
        G[i, i + 1] = -amplitude
    return G


def _mixing_angle(lam: float) -> float:
    if not 0.0 < lam < 1.0:
        raise DomainError(f"transmissivity must lie in (0, 1), got {lam}")
    return float(np.arccos(np.sqrt(lam)))


@lru_cache(maxsize=32)
def _pair_map(cutoff: int, out_cutoff: int, lam: float) -> np.ndarray:
    """Tensor W[x', y', x, y] of the two-mode beamsplitter, inputs below ``cutoff``.

    Each photon-number sector is exponentiated in full, so columns are exact for
    every input |x, y⟩; the x' range is cut to ``out_cutoff`` and y' keeps 2D-1 levels.
    """

    theta = _mixing_angle(lam)
    padded = 2 * cutoff - 1
    W = np.zeros((out_cutoff, padded, cutoff, cutoff))
    for m in range(padded):
        ks = np.arange(m + 1)
        U = expm(_sector_generator(m, ks, theta))
        inputs = ks[(ks < cutoff) & (m - ks < cutoff)]
        outputs = ks[ks < out_cutoff]
        for k in inputs:
            W[outputs, m - outputs, k, m - k] = U[outputs, k]
    return _readonly(W)


def beamsplitter_unitary(space: FockSpace, lam: float) -> np.ndarray:
    """U_λ on a 2n-mode space (X modes first), restricted to the truncated space.

    The generator conserves total photon number, so the restriction is exactly
    unitary and agrees with the untruncated U_λ on states with fewer than D photons.
    """

    if space.n % 2:
        raise DimensionMismatch(f"beamsplitter needs an even mode count, got {space.n}")
    theta = _mixing_angle(lam)
    D, half = space.cutoff, space.n // 2
    pair = np.zeros((D, D, D, D))
    for m in range(2 * D - 1):
        ks = np.arange(max(0, m - D + 1), min(m, D - 1) + 1)
        U = expm(_sector_generator(m, ks, theta))
        for i, k in enumerate(ks):
            pair[ks, m - ks, k, m - k] = U[:, i]
    U_full = _apply_pairs(np.eye(space.dim).reshape((D,) * (2 * space.n)), pair, half)
    return U_full.reshape(space.dim, space.dim)


def _apply_pairs(T: np.ndarray, pair: np.ndarray, half: int) -> np.ndarray:
    """Apply ``pair`` to every (x_j, y_j) axis pair of the leading ket axes of T."""

    letters = iter(string.ascii_letters)
    axes = [next(letters) for _ in range(T.ndim)]
    for j in range(half):
        x, y = axes[j], axes[half + j]
        xo, yo = next(letters), next(letters)
        out = [xo if a == x else yo if a == y else a for a in axes]
        T = np.einsum(f"{xo}{yo}{x}{y},{''.join(axes)}->{''.join(out)}", pair, T)
        axes = out
    return T


def beamsplitter_combine(
    rho_x: DensityMatrix,
    rho_y: DensityMatrix,
    lam: float,
    *,
    output_cutoff: int | None = None,
    budget: Budget = TRUNCATION_BUDGET,
) -> DensityMatrix:
    """E_λ(ρ_X⊗ρ_Y) = tr_Y U_λ(ρ_X⊗ρ_Y)U_λ†.

    ``output_cutoff`` defaults to the input cutoff D; 2D-1 returns the exact output.
    """

    if rho_x.space != rho_y.space:
        raise DimensionMismatch(
            f"inputs live on {rho_x.space} and {rho_y.space}; align them first"
        )
    n, D = rho_x.n, rho_x.cutoff
    out = output_cutoff or D
    if not 1 <= out <= 2 * D - 1:
        raise DomainError(f"output cutoff {out} outside 1..{2 * D - 1}")
    W = _pair_map(D, out, float(lam))

    shape = (D,) * n
    T = np.tensordot(rho_x.mat.reshape(shape * 2), rho_y.mat.reshape(shape * 2), axes=0)
    letters = iter(string.ascii_letters)
    # axes: ket X, bra X, ket Y, bra Y
    kx = [next(letters) for _ in range(n)]
    bx = [next(letters) for _ in range(n)]
    ky = [next(letters) for _ in range(n)]
    by = [next(letters) for _ in range(n)]
    axes = kx + bx + ky + by
    for j in range(n):
        xo, xbo, yo = next(letters), next(letters), next(letters)
        out_axes = [a for a in axes if a not in (ky[j], by[j])]
        out_axes = [xo if a == kx[j] else xbo if a == bx[j] else a for a in out_axes]
        T = np.einsum(
            f"{''.join(axes)},{xo}{yo}{kx[j]}{ky[j]},{xbo}{yo}{bx[j]}{by[j]}"
            f"->{''.join(out_axes)}",
            T,
            W,
            W,
            optimize=True,
        )
        axes = out_axes
    size = out**n
    mat = T.reshape(size, size)
    kept = float(np.trace(mat).real)
    discarded = 1.0 - kept
    if budget is not None and discarded > budget:
        raise TruncationBudgetExceeded(
            f"beamsplitter output discards {discarded:.3e} at cutoff {out}"
        )
    LOGGER.debug("beamsplitter λ=%.3f cutoff %d -> %d, discarded %.3e", lam, D, out, discarded)
    return _normalized(fock_space(n, out), mat, label=f"E_{lam}({rho_x.label},{rho_y.label})")


# Entropies and distances


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S(ρ) in nats with 0·log 0 = 0."""

    return float(entr(np.clip(rho.spectrum, 0.0, 1.0)).sum())


def log_matrix(rho: DensityMatrix, eps: float = EPS_CLAMP) -> np.ndarray:
    """log ρ with eigenvalues clamped to [ε, 1]."""

    w, V = rho.eigh
    return (V * np.log(np.clip(w, eps, 1.0))) @ V.conj().T


def relative_entropy(
    rho: DensityMatrix,
    sigma: DensityMatrix,
    *,
    eps: float = EPS_CLAMP,
    support_tol: float = SUPPORT_TOL,
) -> float:
    """S(ρ‖σ) = tr ρ(log ρ - log σ)."""

    rho, sigma = align(rho, sigma)
    w, V = sigma.eigh
    outside = w < eps
    if outside.any():
        weight = float(np.einsum("ji,jk,ki->", V[:, outside].conj(), rho.mat, V[:, outside]).real)
        if weight > support_tol:
            raise SupportMismatch(
                f"ρ carries weight {weight:.3e} outside the support of σ"
            )
    divergence = -von_neumann_entropy(rho) - rho.expectation(log_matrix(sigma, eps)).real
    return float(divergence)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    rho, sigma = align(rho, sigma)
    return float(np.abs(np.linalg.eigvalsh(rho.mat - sigma.mat)).sum() / 2)


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (tr √(√ρ σ √ρ))²."""

    rho, sigma = align(rho, sigma)
    w, V = rho.eigh
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T
    product = root @ sigma.mat @ root
    inner = np.linalg.eigvalsh((product + product.conj().T) / 2)
    value = float(np.sqrt(np.clip(inner, 0.0, None)).sum() ** 2)
    return min(max(value, 0.0), 1.0)


# Phase-space functions


def characteristic_fn(rho: DensityMatrix, xi: np.ndarray) -> complex:
    """χ(ξ) = tr(D(ξ)ρ)."""

    return rho.expectation(displacement_op(rho.space, xi))


def _coherent_rows(cutoff: int, points: np.ndarray) -> np.ndarray:
    """Unnormalized truncated coherent vectors for phase-space points of shape (m, 2)."""

    alphas = (points[:, 0] + 1j * points[:, 1]) / np.sqrt(2)
    return np.array([coherent_vector(cutoff, a, normalize=False) for a in alphas])


def q_function(rho: DensityMatrix, xi: np.ndarray) -> float:
    """Q(ξ) = ⟨ξ|ρ|ξ⟩/(2π)ⁿ with |ξ⟩ the coherent state of first moments ξ."""

    xi = np.asarray(xi, dtype=float).reshape(rho.n, 2)
    psi = _kron_all(list(_coherent_rows(rho.cutoff, xi)))
    value = np.vdot(psi, rho.mat @ psi).real
    return float(value / (2 * np.pi) ** rho.n)


def q_function_grid(
    rho: DensityMatrix, extent: float, points: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-mode Q on a square grid; returns (xs, ps, Q[i, j] at (xs[i], ps[j]))."""

    if rho.n != 1:
        raise DimensionMismatch("q_function_grid is single-mode")
    xs = np.linspace(-extent, extent, points)
    grid = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
    C = _coherent_rows(rho.cutoff, grid)
    values = np.einsum("gi,ij,gj->g", C.conj(), rho.mat, C).real / (2 * np.pi)
    return xs, xs.copy(), values.reshape(points, points)


def moments_from_q(
    rho: DensityMatrix, extent: float = 8.0, points: int = 161
) -> tuple[np.ndarray, np.ndarray, float]:
    """(d, γ, mass) reconstructed from the Q function by a Riemann sum.

    The Q-function covariance is (γ + I)/2.
    """

    xs, ps, Q = q_function_grid(rho, extent, points)
    cell = (xs[1] - xs[0]) * (ps[1] - ps[0])
    X, P = np.meshgrid(xs, ps, indexing="ij")
    mass = float(Q.sum() * cell)
    weights = Q * cell / mass
    d = np.array([(weights * X).sum(), (weights * P).sum()])
    cov = np.array(
        [
            [(weights * (X - d[0]) ** 2).sum(), (weights * (X - d[0]) * (P - d[1])).sum()],
            [(weights * (X - d[0]) * (P - d[1])).sum(), (weights * (P - d[1]) ** 2).sum()],
        ]
    )
    return d, 2 * cov - np.eye(2), mass


def moments(rho: DensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """d_k = tr(ρR_k), γ_kl = tr(ρ{R_k - d_k, R_l - d_l})."""

    R = rho.space.quadratures
    d = np.array([rho.expectation(Rk).real for Rk in R])
    size = len(R)
    gamma = np.empty((size, size))
    for k in range(size):
        for l in range(k, size):
            second = rho.expectation(R[k] @ R[l]).real
            gamma[k, l] = gamma[l, k] = 2 * (second - d[k] * d[l])
    return d, gamma


def gaussify(
    rho: DensityMatrix, *, tolerance: float = GAUSSIFY_UNCERTAINTY_TOL
) -> GaussianState:
    """Gaussian state with the first and second moments of ρ."""

    d, gamma = moments(rho)
    floor = uncertainty_floor(gamma)
    if floor < -tolerance:
        raise UncertaintyViolation(
            f"{rho.label}: min eig(γ + iJ) = {floor:.3e} at cutoff {rho.cutoff}; "
            "increase the cutoff"
        )
    if floor < -UNCERTAINTY_TOL:
        LOGGER.warning(
            "nudging covariance of %s by %.3e to restore the uncertainty relation",
            rho.label,
            -floor,
        )
        gamma = gamma + (UNCERTAINTY_TOL - floor) * np.eye(gamma.shape[0])
    return GaussianState(d, gamma, label=f"gaussify({rho.label})")


def check_max_entropy(rho: DensityMatrix, *, tolerance: float = 1e-8) -> CheckReport:
    """S(ρ) ≤ S(ρ^G)."""

    entropy = von_neumann_entropy(rho)
    bound = gaussian_entropy(gaussify(rho))
    return CheckReport.evaluate(
        "max_entropy",
        bound - entropy,
        tolerance,
        inputs={"state": rho.label, "cutoff": rho.cutoff},
        diagnostics={"entropy": entropy, "gaussian_entropy": bound},
    )


def check_cross_backend(rho: DensityMatrix, *, tolerance: float = 1e-6) -> CheckReport:
    """For Gaussian ρ the Fock entropy matches the closed form of its gaussification."""

    entropy = von_neumann_entropy(rho)
    closed_form = gaussian_entropy(gaussify(rho))
    return CheckReport.evaluate(
        "cross_backend_entropy",
        -abs(entropy - closed_form),
        tolerance,
        inputs={"state": rho.label, "cutoff": rho.cutoff},
        diagnostics={"entropy": entropy, "gaussian_entropy": closed_form},
    )


__all__ = [
    "Budget",
    "DensityMatrix",
    "FockSpace",
    "align",
    "apply_unitary",
    "beamsplitter_combine",
    "beamsplitter_unitary",
    "characteristic_fn",
    "check_cross_backend",
    "check_max_entropy",
    "coherent_vector",
    "compress",
    "displace",
    "displacement_generator",
    "displacement_op",
    "embed",
    "fidelity",
    "fock_space",
    "gaussify",
    "log_matrix",
    "make_cat",
    "make_coherent",
    "make_displaced_thermal",
    "make_fock",
    "make_thermal",
    "make_vacuum",
    "mix",
    "moments",
    "moments_from_q",
    "partial_trace",
    "phase_rotation",
    "q_function",
    "q_function_grid",
    "random_state",
    "regularize_state",
    "relative_entropy",
    "tensor",
    "trace_distance",
    "unitary_from_generator",
    "von_neumann_entropy",
]
