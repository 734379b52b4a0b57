"""De Bruijn identity and the quantum entropy power inequalities."""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from qepi.config import (
    BLACHMAN_RTOL,
    BLACHMAN_T_MAX,
    DEBRUIJN_ABS_TOL,
    DEBRUIJN_REL_TOL,
    DEBRUIJN_STEP,
    DELTA_STEP_TOL,
    EPI_TOL,
)
from qepi.errors import ClockOverflow, DomainError, RankDeficient, StiffnessFailure
from qepi.models.dto import BlachmanTrace, CheckReport
from qepi.services import backends, diffusion
from qepi.services.fisher import fisher_total
from qepi.services.fock import DensityMatrix

LOGGER = logging.getLogger(__name__)

DEBRUIJN_MIN_TIME = 0.05
DEBRUIJN_STEP_RANGE = (1e-3, 5e-2)


def _pair_inputs(rho_x, rho_y, **extra) -> dict:
    inputs = {
        "x": rho_x.label,
        "y": rho_y.label,
        "backend": backends.describe_backend(rho_x),
        **extra,
    }
    for key, state in (("x", rho_x), ("y", rho_y)):
        if isinstance(state, DensityMatrix):
            inputs[f"tail_mass_{key}"] = float(state.tail_mass)
    return inputs


def de_bruijn_residual(state, t: float, h: float = DEBRUIJN_STEP) -> CheckReport:
    """|dS/dt - J/4| at e^{tL}(ρ), the derivative by a central difference."""

    if t < DEBRUIJN_MIN_TIME:
        raise DomainError(f"de Bruijn check needs t ≥ {DEBRUIJN_MIN_TIME}, got {t}")
    low, high = DEBRUIJN_STEP_RANGE
    if not low <= h <= high:
        raise DomainError(f"step {h} outside [{low}, {high}]")
    before, at, after = diffusion.diffuse_trajectory(state, [t - h, t, t + h])
    derivative = (backends.entropy(after) - backends.entropy(before)) / (2 * h)
    quarter_fisher = fisher_total(at) / 4
    residual = abs(derivative - quarter_fisher)
    return CheckReport.evaluate(
        "de_bruijn",
        -residual,
        max(DEBRUIJN_REL_TOL * quarter_fisher, DEBRUIJN_ABS_TOL),
        inputs={
            "state": state.label,
            "t": t,
            "h": h,
            "backend": backends.describe_backend(state),
        },
        diagnostics={"entropy_rate": derivative, "quarter_fisher": quarter_fisher},
    )


def qepi_prime_check(rho_x, rho_y, lam: float, *, tolerance: float = EPI_TOL) -> CheckReport:
    """S(E_λ(ρ_X⊗ρ_Y)) ≥ λS(ρ_X) + (1-λ)S(ρ_Y)."""

    s_x, s_y = backends.entropy(rho_x), backends.entropy(rho_y)
    s_out = backends.entropy(backends.combine(rho_x, rho_y, lam))
    return CheckReport.evaluate(
        "qepi_prime",
        s_out - lam * s_x - (1 - lam) * s_y,
        tolerance,
        inputs=_pair_inputs(rho_x, rho_y, **{"lambda": lam}),
        diagnostics={"S_x": s_x, "S_y": s_y, "S_out": s_out},
    )


def _power_margin(rho_x, rho_y, lam: float) -> tuple[float, dict[str, float]]:
    n = backends.mode_count(rho_x)
    s_x, s_y = backends.entropy(rho_x), backends.entropy(rho_y)
    s_out = backends.entropy(backends.combine(rho_x, rho_y, lam))
    powers = [math.exp(s / n) for s in (s_x, s_y, s_out)]
    margin = powers[2] - lam * powers[0] - (1 - lam) * powers[1]
    return margin, {"E_x": powers[0], "E_y": powers[1], "E_out": powers[2], "S_out": s_out}


def qepi_power_check(rho_x, rho_y, *, tolerance: float = EPI_TOL) -> CheckReport:
    """e^{S(E(ρ_X⊗ρ_Y))/n} ≥ ½e^{S(ρ_X)/n} + ½e^{S(ρ_Y)/n} at λ = 1/2."""

    margin, diagnostics = _power_margin(rho_x, rho_y, 0.5)
    return CheckReport.evaluate(
        "qepi_power",
        margin,
        tolerance,
        inputs=_pair_inputs(rho_x, rho_y, **{"lambda": 0.5}),
        diagnostics=diagnostics,
    )


def entropy_power_check(
    rho_x, rho_y, lam: float, *, tolerance: float = EPI_TOL
) -> CheckReport:
    """Entropy-power concavity at general λ; recorded, never a pass/fail gate."""

    margin, diagnostics = _power_margin(rho_x, rho_y, lam)
    return CheckReport.evaluate(
        "entropy_power_concavity",
        margin,
        tolerance,
        inputs=_pair_inputs(rho_x, rho_y, **{"lambda": lam}),
        diagnostics=diagnostics,
        normative=False,
    )


def delta_values(rho_x, rho_y, lam: float, t_grid: Sequence[float]) -> list[float]:
    """δ(t) = S(e^{tL}E_λ(ρ_X⊗ρ_Y)) - λS(e^{tL}ρ_X) - (1-λ)S(e^{tL}ρ_Y)."""

    times = [float(t) for t in t_grid]
    combined = backends.combine(rho_x, rho_y, lam)
    trajectories = [
        diffusion.diffuse_trajectory(state, times) for state in (combined, rho_x, rho_y)
    ]
    return [
        backends.entropy(z) - lam * backends.entropy(x) - (1 - lam) * backends.entropy(y)
        for z, x, y in zip(*trajectories)
    ]


def delta_monotonicity_trace(
    rho_x,
    rho_y,
    lam: float,
    t_grid: Sequence[float],
    *,
    tolerance: float = DELTA_STEP_TOL,
) -> CheckReport:
    """δ(t) is non-increasing on the grid and ends non-negative."""

    times = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise DomainError(f"t_grid must be strictly increasing: {times}")
    deltas = delta_values(rho_x, rho_y, lam, times)
    decreases = [a - b for a, b in zip(deltas, deltas[1:])]
    margin = min([deltas[-1], *decreases])
    return CheckReport.evaluate(
        "delta_monotonicity",
        margin,
        tolerance,
        inputs=_pair_inputs(rho_x, rho_y, **{"lambda": lam, "t_grid": times}),
        diagnostics={f"delta_{t:g}": d for t, d in zip(times, deltas)},
    )


def _stam_slack(x, y, z) -> float | None:
    try:
        j_x, j_y, j_z = fisher_total(x), fisher_total(y), fisher_total(z)
    except RankDeficient:
        return None
    return 2 * j_x * j_y / (j_x + j_y) - j_z


def blachman_replay(
    rho_x,
    rho_y,
    t_max: float = BLACHMAN_T_MAX,
    *,
    points: int = 9,
    tolerance: float = DELTA_STEP_TOL,
) -> tuple[BlachmanTrace, CheckReport]:
    """Replay the diffusion-clock construction for the 50:50 inequality.

    The clocks solve F' = E_X(F), G' = E_Y(G) from 0 with E the entropy power of
    the diffused input, H = (F + G)/2, and δ = (E_X(F) + E_Y(G)) / 2E_Z(H) with Z
    the beamsplitter output. The inequality is δ(0) ≤ 1 and δ increases towards 1.
    """

    if t_max <= 0:
        raise DomainError(f"t_max must be positive, got {t_max}")
    rho_z = backends.combine(rho_x, rho_y, 0.5)
    horizons = (diffusion.horizon(rho_x), diffusion.horizon(rho_y))

    def power(state, clock: float, limit: float) -> float:
        if clock > limit:
            raise ClockOverflow(
                f"{state.label}: clock {clock:.4f} passed the diffusion horizon {limit:.4f}"
            )
        return backends.entropy_power(diffusion.diffuse(state, max(clock, 0.0)))

    def rhs(_t: float, clocks: np.ndarray) -> list[float]:
        return [
            power(rho_x, clocks[0], horizons[0]),
            power(rho_y, clocks[1], horizons[1]),
        ]

    t_grid = np.linspace(0.0, t_max, points)
    solution = solve_ivp(
        rhs, (0.0, t_max), [0.0, 0.0], t_eval=t_grid, rtol=BLACHMAN_RTOL, atol=BLACHMAN_RTOL
    )
    if solution.status != 0:
        raise StiffnessFailure(f"clock integration failed: {solution.message}")

    F = [float(v) for v in solution.y[0]]
    G = [float(v) for v in solution.y[1]]
    H = [(f + g) / 2 for f, g in zip(F, G)]
    E_X, E_Y, E_Z, delta, stam = [], [], [], [], []
    for f, g, h in zip(F, G, H):
        x_f, y_g = diffusion.diffuse(rho_x, f), diffusion.diffuse(rho_y, g)
        z_h = diffusion.diffuse(rho_z, h)
        e_x, e_y, e_z = (backends.entropy_power(s) for s in (x_f, y_g, z_h))
        E_X.append(e_x)
        E_Y.append(e_y)
        E_Z.append(e_z)
        delta.append((e_x + e_y) / (2 * e_z))
        stam.append(_stam_slack(x_f, y_g, z_h))

    trace = BlachmanTrace(
        t_grid=[float(t) for t in t_grid],
        F=F,
        G=G,
        H=H,
        E_X=E_X,
        E_Y=E_Y,
        E_Z=E_Z,
        delta=delta,
        stam_slack=stam,
    )
    increments = [b - a for a, b in zip(delta, delta[1:])]
    margin = min([1 - delta[0], *increments])
    diagnostics = {"delta_0": delta[0], "delta_end": delta[-1], "F_end": F[-1], "G_end": G[-1]}
    recorded = [s for s in stam if s is not None]
    if recorded:
        diagnostics["min_stam_slack"] = min(recorded)
    LOGGER.info("blachman replay δ(0)=%.6f δ(T)=%.6f", delta[0], delta[-1])
    report = CheckReport.evaluate(
        "blachman",
        margin,
        tolerance,
        inputs=_pair_inputs(rho_x, rho_y, t_max=t_max, points=points),
        diagnostics=diagnostics,
    )
    return trace, report
