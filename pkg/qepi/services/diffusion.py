"""The quantum diffusion semigroup e^{tL} on both backends and its structural checks.

L(ρ) = -1/4 Σ_k [R_k, [R_k, ρ]] adds tI to the covariance matrix after time t.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, singledispatch
from typing import Literal, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.integrate import DOP853
from scipy.optimize import brentq

from qepi.config import (
    COVARIANCE_RULE_TOL,
    CUTOFF_SIGMAS,
    DISTANCE_TOL,
    EPI_TOL,
    HERMITE_ORDER,
    MAX_DIFFUSION_DIM,
    MONOTONE_TOL,
    ODE_MIN_STEP,
    ODE_TOL,
    PSD_REPAIR_TOL,
    PSD_TOL,
    TRACE_DRIFT_TOL,
    TRUNCATION_BUDGET,
)
from qepi.errors import DomainError, StiffnessFailure, TruncationBudgetExceeded
from qepi.models.dto import CheckReport
from qepi.services import backends, fock
from qepi.services.fock import Budget, DensityMatrix, FockSpace
from qepi.services.phase_space import (
    GaussianState,
    apply_channel,
    diffusion_channel,
    g,
    gaussian_entropy,
    mean_photon,
    symplectic_eigenvalues,
)

LOGGER = logging.getLogger(__name__)


def _lindblad_apply(space: FockSpace, mat: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mat)
    for R in space.quadratures:
        R_rho = R @ mat
        out += R @ R_rho - 2 * R_rho @ R + mat @ R @ R
    return -out / 4


def lindblad_rhs(rho: DensityMatrix) -> np.ndarray:
    """L(ρ) as a traceless Hermitian matrix."""

    return _lindblad_apply(rho.space, np.asarray(rho.mat))


def _estimate_cutoff(rho: DensityMatrix, t: float, budget: Budget, sigmas: float) -> float:
    """Per-mode cutoff estimate after diffusing for ``t``.

    Mean photon number grows as N + t/2; the cutoff covers ``sigmas`` standard
    deviations of the photon-number distribution and, when a budget is given, the
    geometric tail of a thermal state of the same mean.
    """

    occupations = rho.space.occupations
    estimate = 0.0
    for j in range(rho.n):
        mean = float(rho.populations @ occupations[:, j])
        variance = float(rho.populations @ occupations[:, j] ** 2) - mean**2
        grown = mean + t / 2
        std = math.sqrt(grown * (grown + 1) + max(variance, 0.0))
        estimate = max(estimate, grown + sigmas * std + 1)
        if budget is not None and grown > 0:
            estimate = max(estimate, math.log(budget) / math.log(grown / (grown + 1)) + 1)
    return estimate


def required_cutoff(
    rho: DensityMatrix,
    t: float,
    *,
    budget: Budget = TRUNCATION_BUDGET,
    sigmas: float = CUTOFF_SIGMAS,
) -> int:
    """Smallest per-mode cutoff that keeps e^{tL}(ρ) inside the truncation budget."""

    if t < 0:
        raise DomainError(f"diffusion time must be non-negative, got {t}")
    if t == 0:
        return rho.cutoff
    return max(rho.cutoff, math.ceil(_estimate_cutoff(rho, t, budget, sigmas)))


def max_cutoff(n: int) -> int:
    return int(round(MAX_DIFFUSION_DIM ** (1 / n)))


def diffusion_horizon(
    rho: DensityMatrix,
    cutoff: int | None = None,
    *,
    budget: Budget = TRUNCATION_BUDGET,
    sigmas: float = CUTOFF_SIGMAS,
) -> float:
    """Largest t for which ``required_cutoff`` stays within ``cutoff``."""

    cutoff = max_cutoff(rho.n) if cutoff is None else cutoff

    def excess(t: float) -> float:
        return _estimate_cutoff(rho, t, budget, sigmas) - cutoff

    if excess(0.0) >= 0:
        return 0.0
    upper = 1.0
    while excess(upper) < 0:
        upper *= 2
    return float(brentq(excess, 0.0, upper, xtol=1e-6))


def _working_space(
    rho: DensityMatrix, t: float, cutoff: int | None, budget: Budget
) -> FockSpace:
    needed = required_cutoff(rho, t, budget=budget)
    if cutoff is not None and cutoff < needed:
        raise TruncationBudgetExceeded(
            f"{rho.label}: diffusing for t={t} needs cutoff {needed}, got {cutoff}"
        )
    work = needed if cutoff is None else cutoff
    if work > max_cutoff(rho.n):
        raise TruncationBudgetExceeded(
            f"{rho.label}: diffusing for t={t} needs cutoff {work}, "
            f"above the limit {max_cutoff(rho.n)} for {rho.n} mode(s)"
        )
    return fock.fock_space(rho.n, work)


def _finalize(space: FockSpace, mat: np.ndarray, label: str, budget: Budget) -> DensityMatrix:
    mat = (mat + mat.conj().T) / 2
    drift = abs(float(np.trace(mat).real) - 1)
    if drift > TRACE_DRIFT_TOL:
        raise StiffnessFailure(f"{label}: trace drifted by {drift:.3e}")
    w, V = np.linalg.eigh(mat)
    if w.min() < -PSD_REPAIR_TOL:
        raise StiffnessFailure(f"{label}: eigenvalue {w.min():.3e} after integration")
    if w.min() < -PSD_TOL:
        LOGGER.warning("clipping eigenvalue %.3e of %s", w.min(), label)
    w = np.clip(w, 0.0, None)
    mat = (V * (w / w.sum())) @ V.conj().T
    return DensityMatrix(space, mat, label=label).check_budget(budget)


def evolve_ode_trajectory(
    rho: DensityMatrix,
    times: Sequence[float],
    *,
    tol: float = ODE_TOL,
    min_step: float = ODE_MIN_STEP,
    cutoff: int | None = None,
    budget: Budget = TRUNCATION_BUDGET,
) -> list[DensityMatrix]:
    """Snapshots of e^{tL}(ρ) at increasing ``times`` from a single integration.

    Every snapshot lives on the same working space, enlarged from ρ's cutoff as
    needed for the final time. The DOP853 stepper is driven directly; an accepted
    step shorter than ``min_step`` before the final time is a StiffnessFailure.
    """

    times = [float(t) for t in times]
    if not times:
        return []
    if times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
        raise DomainError(f"times must be non-negative and strictly increasing: {times}")
    space = _working_space(rho, times[-1], cutoff, budget)
    start = fock.embed(rho, space.cutoff)
    if times[-1] == 0:
        return [start]

    dim = space.dim

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        return _lindblad_apply(space, y.reshape(dim, dim)).ravel()

    y0 = np.asarray(start.mat, dtype=complex).ravel()
    solver = DOP853(rhs, 0.0, y0, times[-1], rtol=tol, atol=tol)
    samples: list[np.ndarray] = []
    pending = list(times)
    while pending and pending[0] == 0:
        samples.append(y0)
        pending.pop(0)
    while pending:
        message = solver.step()
        if solver.status == "failed":
            raise StiffnessFailure(f"{rho.label}: integrator failed: {message}")
        if solver.status == "running" and solver.step_size < min_step:
            raise StiffnessFailure(
                f"{rho.label}: step size {solver.step_size:.3e} below {min_step:.1e} "
                f"at t={solver.t:.4f}"
            )
        if pending[0] > solver.t and solver.status == "running":
            continue
        interpolant = solver.dense_output()
        while pending and (pending[0] <= solver.t or solver.status == "finished"):
            t = pending.pop(0)
            samples.append(solver.y.copy() if t == solver.t else interpolant(t))
    LOGGER.debug(
        "diffused %s to t=%.3f at cutoff %d (%d evaluations)",
        rho.label,
        times[-1],
        space.cutoff,
        solver.nfev,
    )
    return [
        _finalize(space, y.reshape(dim, dim), f"e^{t}L({rho.label})", budget)
        for t, y in zip(times, samples)
    ]


def evolve_ode(
    rho: DensityMatrix,
    t: float,
    *,
    tol: float = ODE_TOL,
    cutoff: int | None = None,
    budget: Budget = TRUNCATION_BUDGET,
) -> DensityMatrix:
    """e^{tL}(ρ) by adaptive Runge-Kutta integration of dρ/dt = L(ρ)."""

    if t < 0:
        raise DomainError(f"diffusion time must be non-negative, got {t}")
    if t == 0:
        return rho
    return evolve_ode_trajectory(rho, [t], tol=tol, cutoff=cutoff, budget=budget)[0]


def evolve_random_displacement(
    rho: DensityMatrix,
    t: float,
    order: int = HERMITE_ORDER,
    *,
    cutoff: int | None = None,
    budget: Budget = TRUNCATION_BUDGET,
) -> DensityMatrix:
    """e^{tL}(ρ) as a Gaussian mixture of displacements.

    Each quadrature is smeared by displacements of variance t/2 in turn, with an
    ``order``-point Gauss-Hermite rule. Displacements act on a space of twice the
    working cutoff before compressing back.
    """

    if t < 0:
        raise DomainError(f"diffusion time must be non-negative, got {t}")
    if order < 5:
        raise DomainError(f"quadrature order must be at least 5, got {order}")
    if t == 0:
        return rho
    space = _working_space(rho, t, cutoff, budget)
    padded = fock.fock_space(rho.n, 2 * space.cutoff)
    mat = np.asarray(fock.embed(rho, padded.cutoff).mat)
    nodes, weights = hermgauss(order)
    shifts = np.sqrt(t) * nodes
    weights = weights / np.sqrt(np.pi)
    for k in range(2 * rho.n):
        w, V = np.linalg.eigh(padded.translation_generator(k))
        smeared = np.zeros_like(mat)
        for shift, weight in zip(shifts, weights):
            U = (V * np.exp(1j * shift * w)) @ V.conj().T
            smeared += weight * (U @ mat @ U.conj().T)
        mat = smeared
    state = fock.DensityMatrix(padded, mat / np.trace(mat).real, label=rho.label)
    compressed = fock.compress(state, space.cutoff, budget=budget)
    return DensityMatrix(space, compressed.mat, label=f"e^{t}L({rho.label})").check_budget(budget)


@singledispatch
def diffuse(state, t: float):
    """e^{tL} on either backend."""

    raise TypeError(f"unsupported state type {type(state).__name__}")


@diffuse.register
def _(state: GaussianState, t: float) -> GaussianState:
    if t < 0:
        raise DomainError(f"diffusion time must be non-negative, got {t}")
    out = apply_channel(diffusion_channel(t, state.n), state)
    return GaussianState(out.d, out.gamma, label=f"e^{t}L({state.label})")


@diffuse.register
def _(state: DensityMatrix, t: float) -> DensityMatrix:
    return evolve_ode(state, t)


def diffuse_trajectory(state, times: Sequence[float]) -> list:
    if isinstance(state, DensityMatrix):
        return evolve_ode_trajectory(state, times)
    return [diffuse(state, t) for t in times]


def horizon(state) -> float:
    """Truncation-safe diffusion time for ``state``; unbounded on the Gaussian backend."""

    if isinstance(state, DensityMatrix):
        return diffusion_horizon(state)
    return math.inf


@dataclass(frozen=True)
class DiffusionRun:
    """A diffusion of ``initial`` sampled at ``times`` by one of the two methods."""

    initial: DensityMatrix
    times: tuple[float, ...]
    method: Literal["ode", "random_displacement"] = "ode"
    tolerance: float = ODE_TOL
    order: int = HERMITE_ORDER
    budget: Budget = field(default=TRUNCATION_BUDGET)

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.times)
        if not times or times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError(f"times must be non-negative and strictly increasing: {times}")
        object.__setattr__(self, "times", times)

    @cached_property
    def _snapshots(self) -> tuple[DensityMatrix, ...]:
        if self.method == "ode":
            return tuple(
                evolve_ode_trajectory(
                    self.initial, self.times, tol=self.tolerance, budget=self.budget
                )
            )
        return tuple(
            evolve_random_displacement(self.initial, t, self.order, budget=self.budget)
            for t in self.times
        )

    def snapshots(self) -> list[DensityMatrix]:
        return list(self._snapshots)

    def entropies(self) -> list[float]:
        return [fock.von_neumann_entropy(state) for state in self._snapshots]


# Structural checks


def check_beamsplitter_compatibility(
    rho_x,
    rho_y,
    lam: float,
    t_x: float,
    t_y: float,
    *,
    tolerance: float = DISTANCE_TOL,
) -> CheckReport:
    """E_λ∘(e^{t_X L}⊗e^{t_Y L}) = e^{tL}∘E_λ with t = λt_X + (1-λ)t_Y."""

    t = lam * t_x + (1 - lam) * t_y
    left = backends.combine(diffuse(rho_x, t_x), diffuse(rho_y, t_y), lam)
    right = diffuse(backends.combine(rho_x, rho_y, lam), t)
    distance = backends.state_distance(left, right)
    LOGGER.info("beamsplitter compatibility distance %.3e", distance)
    return CheckReport.evaluate(
        "beamsplitter_compatibility",
        -distance,
        tolerance,
        inputs={
            "x": rho_x.label,
            "y": rho_y.label,
            "lambda": lam,
            "t_x": t_x,
            "t_y": t_y,
            "backend": backends.describe_backend(rho_x),
        },
        diagnostics={"distance": distance, "t": t},
    )


def check_scaling_bounds(state, t: float, *, tolerance: float = EPI_TOL) -> CheckReport:
    """n g(N(t-1)) ≤ S(e^{tL}ρ) ≤ Σ g(N(ν_k(γ + tI))).

    The upper bound is the entropy of the Gaussian state with the diffused
    covariance. The isotropic form Σ g(N(t+ν_k(γ))) is reported alongside; it is
    not a bound for squeezed inputs. The lower bound needs t > 2; for 1 ≤ t ≤ 2
    only the upper bound is evaluated and the report is non-normative.
    """

    if t < 1:
        raise DomainError(f"scaling bounds need t ≥ 1, got {t}")
    n = backends.mode_count(state)
    _, gamma = backends.moments(state)
    entropy = backends.entropy(diffuse(state, t))
    upper = float(np.sum(g(mean_photon(symplectic_eigenvalues(gamma + t * np.eye(2 * n))))))
    isotropic = float(np.sum(g(mean_photon(t + symplectic_eigenvalues(gamma)))))
    upper_slack = upper - entropy
    diagnostics = {
        "entropy": entropy,
        "upper": upper,
        "upper_slack": upper_slack,
        "isotropic_upper": isotropic,
        "isotropic_upper_slack": isotropic - entropy,
    }
    normative = t > 2
    margin = upper_slack
    if normative:
        lower = n * g(mean_photon(t - 1))
        diagnostics.update(lower=lower, lower_slack=entropy - lower)
        margin = min(margin, entropy - lower)
    return CheckReport.evaluate(
        "scaling_bounds",
        margin,
        tolerance,
        inputs={"state": state.label, "t": t, "backend": backends.describe_backend(state)},
        diagnostics=diagnostics,
        normative=normative,
    )


def gaussification_gap(state, t: float) -> float:
    """S(e^{tL}(ρ^G)) - S(e^{tL}(ρ)), the relative entropy to the gaussification."""

    if isinstance(state, GaussianState):
        return 0.0
    gaussian = fock.gaussify(state)
    return gaussian_entropy(diffuse(gaussian, t)) - fock.von_neumann_entropy(diffuse(state, t))


def check_asymptotics(
    state, t_grid: Sequence[float], *, tolerance: float = MONOTONE_TOL
) -> CheckReport:
    """|S/n - (1 - log 2 + log t)| and the gaussification gap decrease along ``t_grid``."""

    times = sorted(float(t) for t in t_grid)
    if times[0] <= 0:
        raise DomainError("asymptotic residuals need t > 0")
    n = backends.mode_count(state)
    gaussian = state if isinstance(state, GaussianState) else fock.gaussify(state)
    evolved = diffuse_trajectory(state, times)
    residuals, power_residuals, gaps = [], [], []
    for t, rho_t in zip(times, evolved):
        entropy = backends.entropy(rho_t)
        residuals.append(abs(entropy / n - (1 - math.log(2) + math.log(t))))
        power_residuals.append(abs(math.exp(entropy / n) / t - math.e / 2))
        gaps.append(gaussian_entropy(diffuse(gaussian, t)) - entropy)
    steps = [a - b for a, b in zip(residuals, residuals[1:])]
    steps += [a - b for a, b in zip(gaps, gaps[1:])]
    diagnostics: dict[str, float] = {}
    for t, r, p, gap in zip(times, residuals, power_residuals, gaps):
        diagnostics[f"residual_{t:g}"] = r
        diagnostics[f"power_residual_{t:g}"] = p
        diagnostics[f"gap_{t:g}"] = gap
    return CheckReport.evaluate(
        "asymptotics",
        min(steps) if steps else 0.0,
        tolerance,
        inputs={"state": state.label, "t_grid": times},
        diagnostics=diagnostics,
    )


def check_covariance_rule(
    state, t: float, *, tolerance: float = COVARIANCE_RULE_TOL
) -> CheckReport:
    """d is invariant and γ(t) = γ(0) + tI."""

    d0, gamma0 = backends.moments(state)
    d_t, gamma_t = backends.moments(diffuse(state, t))
    d_dev = float(np.abs(d_t - d0).max())
    gamma_dev = float(np.abs(gamma_t - gamma0 - t * np.eye(gamma0.shape[0])).max())
    return CheckReport.evaluate(
        "covariance_rule",
        -max(d_dev, gamma_dev),
        tolerance,
        inputs={"state": state.label, "t": t, "backend": backends.describe_backend(state)},
        diagnostics={"d_deviation": d_dev, "gamma_deviation": gamma_dev},
    )


def check_method_agreement(
    rho: DensityMatrix,
    t: float,
    order: int = HERMITE_ORDER,
    *,
    tolerance: float = DISTANCE_TOL,
) -> CheckReport:
    """Trace distance between the ODE and random-displacement evolutions."""

    by_ode = evolve_ode(rho, t)
    by_mixture = evolve_random_displacement(rho, t, order)
    distance = fock.trace_distance(by_ode, by_mixture)
    return CheckReport.evaluate(
        "method_agreement",
        -distance,
        tolerance,
        inputs={"state": rho.label, "t": t, "order": order},
        diagnostics={"distance": distance},
    )


def check_entropy_monotone(
    state, times: Sequence[float], *, tolerance: float = MONOTONE_TOL
) -> CheckReport:
    """S(e^{tL}ρ) is non-decreasing along ``times``."""

    times = sorted(float(t) for t in times)
    entropies = [backends.entropy(s) for s in diffuse_trajectory(state, times)]
    increments = [b - a for a, b in zip(entropies, entropies[1:])]
    return CheckReport.evaluate(
        "entropy_monotone",
        min(increments) if increments else 0.0,
        tolerance,
        inputs={"state": state.label, "times": times},
        diagnostics={f"entropy_{t:g}": s for t, s in zip(times, entropies)},
    )


def check_gaussian_map(
    rho: DensityMatrix, t: float, *, tolerance: float = COVARIANCE_RULE_TOL
) -> CheckReport:
    """gaussify commutes with diffusion at the level of (d, γ)."""

    evolved = fock.gaussify(evolve_ode(rho, t))
    expected = diffuse(fock.gaussify(rho), t)
    deviation = backends.state_distance(evolved, expected)
    return CheckReport.evaluate(
        "gaussian_map",
        -deviation,
        tolerance,
        inputs={"state": rho.label, "t": t},
        diagnostics={"deviation": deviation},
    )
