"""Trial planning and execution for every check suite of the runner.

A suite is planned into an ordered list of ``TrialTask`` values. Each task carries
everything it needs (including the run configuration), so tasks can be shipped
to worker processes and executed in any order; the per-trial generator depends
only on (seed, suite, trial).
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from qepi import logging_conf
from qepi.models.dto import SUITES, CheckReport, ReportRow, RunConfig
from qepi.services import diffusion, ensembles, epi, fisher, state_spec
from qepi.services.ensembles import THERMAL_FIXTURES
from qepi.services.fock import DensityMatrix
from qepi.services.phase_space import (
    GaussianState,
    check_covariance_thermal_bound,
    weak_submajorization_check,
)
from qepi.services.report import to_row

LOGGER = logging.getLogger(__name__)

SCALING_SPECS = ("vacuum", "thermal(1)", "fock(2)")
SCALING_TIMES = (2.5, 3.0, 4.0)
SQUEEZED_SCALING = ((0.5, 3.0), (0.8, 3.0), (0.8, 1.5))
GAUSSIAN_ASYMPTOTIC_TIMES = (2.0, 4.0, 8.0)
FOCK_ASYMPTOTIC_TIMES = (2.0, 3.0, 4.0)
FISHER_DIRECTIONS = (0, 1)
# Per-mode cutoffs kept small where a check multiplies the working dimension.
ADDITIVITY_CUTOFF = 6
# Products of two factors must stay above the rank floor: 1e-2 * thermal(0.5)
# keeps every factor eigenvalue above 2.7e-5 at cutoff 6.
ADDITIVITY_REGULARIZATION = 1e-2
TRANSLATION_CUTOFF = 10
DIFFUSION_CUTOFF = 10
DIFFUSION_SUPPORT = 3
COMPATIBILITY_TIMES = (0.1, 0.25, 0.5)
METHOD_AGREEMENT_T_MAX = 3.0
FUZZ_CUTOFF = 12
BLACHMAN_FOCK_T_MAX = 1.0
BLACHMAN_FOCK_CUTOFF = 12
BLACHMAN_POINTS = 9

# Fixture pairs replayed by the blachman suite; the last one is non-Gaussian.
BLACHMAN_PAIRS: tuple[tuple[str, str], ...] = (
    ("thermal(1)", "thermal(1)"),
    ("thermal(0.5)", "thermal(2)"),
    ("vacuum", "thermal(1)"),
    ("vacuum", "thermal(2)"),
    ("thermal(0.5)", "thermal(1)"),
    ("coherent(1)", "thermal(1)"),
    ("coherent(0.5,0.5)", "thermal(2)"),
    ("thermal(1)*thermal(2)", "thermal(0.5)*vacuum"),
    ("coherent(1)*thermal(1)", "thermal(2)*thermal(0.5)"),
    ("fock(1)", "thermal(1)"),
)


@dataclass(frozen=True)
class TrialTask:
    """One unit of work: a suite, a trial index, what to run and the run config."""

    suite: str
    trial: int
    kind: str
    config: RunConfig
    params: tuple = ()

    @property
    def suite_index(self) -> int:
        return SUITES.index(self.suite)

    def generator(self) -> np.random.Generator:
        return ensembles.trial_generator(self.config.seed, self.suite_index, self.trial)


def _numbered(suite: str, config: RunConfig, items: list[tuple[str, tuple]]) -> list[TrialTask]:
    return [
        TrialTask(suite, trial, kind, config, params)
        for trial, (kind, params) in enumerate(items)
    ]


def _random_items(config: RunConfig) -> list[tuple[str, tuple]]:
    return [("random", ())] * config.trials


def _positive_times(config: RunConfig, floor: float = 0.0) -> list[float]:
    times = [t for t in config.t_grid if t > floor]
    skipped = [t for t in config.t_grid if t <= floor]
    if skipped:
        LOGGER.warning("skipping times %s at or below %g", skipped, floor)
    return times


def plan_suite(suite: str, config: RunConfig) -> list[TrialTask]:
    """Ordered trials of ``suite``; fixtures come first, then ``trials`` random draws."""

    if suite == "fock-epi":
        specs = ensembles.FIXTURE_SPECS
        fixtures = [
            ("fixture", (spec, specs[(i + 1) % len(specs)])) for i, spec in enumerate(specs)
        ]
        items = fixtures + _random_items(config)
    elif suite == "fisher":
        items = [("thermal", (N,)) for N in THERMAL_FIXTURES] + _random_items(config)
    elif suite == "debruijn":
        times = _positive_times(config, epi.DEBRUIJN_MIN_TIME)
        oracle = [("thermal", (N, t)) for N, t in itertools.product(THERMAL_FIXTURES, times)]
        items = oracle + (_random_items(config) if times else [])
    elif suite == "diffusion":
        scaling = [
            ("scaling", (spec, t)) for spec, t in itertools.product(SCALING_SPECS, SCALING_TIMES)
        ]
        squeezed = [("squeezed", params) for params in SQUEEZED_SCALING]
        items = scaling + squeezed + [("asymptotics", ())] + _random_items(config)
    elif suite == "blachman":
        items = [("fixture", pair) for pair in BLACHMAN_PAIRS]
    elif suite in ("gaussian-epi", "conjecture-fuzz"):
        items = _random_items(config)
    else:
        raise ValueError(f"unknown suite {suite!r}")
    return _numbered(suite, config, items)


def plan(config: RunConfig) -> list[TrialTask]:
    return [task for suite in config.suites() for task in plan_suite(suite, config)]


# Suite bodies: each returns the CheckReports of one trial.


def _gaussian_epi(task: TrialTask, rng: np.random.Generator) -> list[CheckReport]:
    config = task.config
    x, y = ensembles.random_gaussian_pair(rng)
    reports = [epi.qepi_prime_check(x, y, lam) for lam in config.lambda_grid]
    reports.append(epi.qepi_power_check(x, y))
    lam = ensembles.pick(rng, config.lambda_grid)
    reports.append(epi.delta_monotonicity_trace(x, y, lam, sorted({0.0, *config.t_grid})))
    reports.append(check_covariance_thermal_bound(x.gamma, y.gamma))
    n = ensembles.pick(rng, (1, 2, 3))
    reports.append(
        weak_submajorization_check(ensembles.random_spd(rng, n), ensembles.random_spd(rng, n))
    )
    return reports


def _fock_pair(task: TrialTask, rng: np.random.Generator):
    cutoff = task.config.cutoff
    if task.kind == "fixture":
        states = ensembles.fixture_states(cutoff, task.params)
        return states[task.params[0]], states[task.params[1]]
    return ensembles.random_fock_pair(rng, cutoff)


def _fock_epi(task: TrialTask, rng: np.random.Generator) -> list[CheckReport]:
    x, y = _fock_pair(task, rng)
    reports = [epi.qepi_prime_check(x, y, lam) for lam in task.config.lambda_grid]
    reports.append(epi.qepi_power_check(x, y))
    return reports


def _fisher(task: TrialTask, rng: np.random.Generator) -> list[CheckReport]:
    if task.kind == "thermal":
        (N,) = task.params
        return [fisher.check_thermal_fisher(N, direction) for direction in FISHER_DIRECTIONS]
    config = task.config
    x, y = ensembles.random_fock_pair(rng, config.cutoff)
    direction = ensembles.pick(rng, FISHER_DIRECTIONS)
    lam = ensembles.pick(rng, config.lambda_grid)
    w_x, w_y = (float(w) for w in rng.uniform(0.2, 2.0, size=2))
    reports = [
        fisher.check_fisher_oracle(x, direction),
        fisher.check_reparametrization(x, direction, float(rng.uniform(0.5, 2.0))),
        fisher.check_data_processing(
            x, direction, ensembles.random_channel(rng, config.cutoff)
        ),
        fisher.check_convexity(x, y, lam),
        fisher.check_weighted_fisher(x, y, lam, w_x, w_y),
        fisher.check_stam(x, y),
    ]
    a, b = ensembles.random_fock_pair(
        rng, ADDITIVITY_CUTOFF, eps=ADDITIVITY_REGULARIZATION
    )
    reports.append(fisher.check_fisher_additivity(a, b))
    u, v = ensembles.random_fock_pair(rng, TRANSLATION_CUTOFF)
    reports.append(
        fisher.check_translation_compatibility(
            u, v, lam, w_x, w_y, float(rng.uniform(-0.2, 0.2)), direction
        )
    )
    return reports


def _debruijn(task: TrialTask, rng: np.random.Generator) -> list[CheckReport]:
    if task.kind == "thermal":
        N, t = task.params
        return [epi.de_bruijn_residual(GaussianState.thermal(N), t)]
    times = _positive_times(task.config, epi.DEBRUIJN_MIN_TIME)
    state = ensembles.random_fock_state(
        rng, DIFFUSION_CUTOFF, support=DIFFUSION_SUPPORT
    )
    return [epi.de_bruijn_residual(state, ensembles.pick(rng, times))]


def _diffusion(task: TrialTask, rng: np.random.Generator) -> list[CheckReport]:
    if task.kind == "scaling":
        spec, t = task.params
        reports = [
            diffusion.check_scaling_bounds(
                state_spec.build_fock(spec, DIFFUSION_CUTOFF, budget=None), t
            )
        ]
        gaussian = state_spec.build_gaussian(spec)
        if gaussian is not None:
            reports.append(diffusion.check_scaling_bounds(gaussian, t))
        return reports
    if task.kind == "squeezed":
        r, t = task.params
        return [diffusion.check_scaling_bounds(GaussianState.squeezed(r), t)]
    if task.kind == "asymptotics":
        return [
            diffusion.check_asymptotics(GaussianState.thermal(1.0), GAUSSIAN_ASYMPTOTIC_TIMES),
            diffusion.check_asymptotics(
                state_spec.build_fock("fock(1)", DIFFUSION_CUTOFF), FOCK_ASYMPTOTIC_TIMES
            ),
        ]
    config = task.config
    x, y = ensembles.random_fock_pair(rng, DIFFUSION_CUTOFF, support=DIFFUSION_SUPPORT)
    times = _positive_times(config) or [1.0]
    t = ensembles.pick(rng, times)
    lam = ensembles.pick(rng, config.lambda_grid)
    return [
        diffusion.check_covariance_rule(x, t),
        diffusion.check_method_agreement(x, min(t, METHOD_AGREEMENT_T_MAX)),
        diffusion.check_entropy_monotone(x, sorted({0.0, *times})),
        diffusion.check_gaussian_map(x, t),
        diffusion.check_beamsplitter_compatibility(
            x,
            y,
            lam,
            ensembles.pick(rng, COMPATIBILITY_TIMES),
            ensembles.pick(rng, COMPATIBILITY_TIMES),
        ),
    ]


def _blachman_pair(specs: tuple[str, str]):
    """Both states on the Gaussian backend when possible, otherwise both in Fock space."""

    gaussians = [state_spec.build_gaussian(spec) for spec in specs]
    if all(state is not None for state in gaussians):
        return tuple(gaussians)
    return tuple(
        state_spec.build_fock(spec, BLACHMAN_FOCK_CUTOFF, budget=None) for spec in specs
    )


def _blachman(task: TrialTask, rng: np.random.Generator) -> list[CheckReport]:
    x, y = _blachman_pair(task.params)
    t_max = BLACHMAN_FOCK_T_MAX if isinstance(x, DensityMatrix) else epi.BLACHMAN_T_MAX
    _, report = epi.blachman_replay(x, y, t_max, points=BLACHMAN_POINTS)
    return [report]


def _conjecture_fuzz(task: TrialTask, rng: np.random.Generator) -> list[CheckReport]:
    x, y = ensembles.random_gaussian_pair(rng)
    reports = [epi.entropy_power_check(x, y, lam) for lam in task.config.lambda_grid]
    if task.trial % 2 == 0:
        u, v = ensembles.random_fock_pair(rng, FUZZ_CUTOFF)
        reports += [epi.entropy_power_check(u, v, lam) for lam in task.config.lambda_grid]
    return reports


SUITE_RUNNERS: dict[str, Callable[[TrialTask, np.random.Generator], list[CheckReport]]] = {
    "gaussian-epi": _gaussian_epi,
    "fock-epi": _fock_epi,
    "fisher": _fisher,
    "debruijn": _debruijn,
    "diffusion": _diffusion,
    "blachman": _blachman,
    "conjecture-fuzz": _conjecture_fuzz,
}


def _with_override(report: CheckReport, config: RunConfig) -> CheckReport:
    tolerance = config.tolerance(report.name, report.tolerance)
    if tolerance == report.tolerance:
        return report
    return CheckReport.evaluate(
        report.name,
        report.margin,
        tolerance,
        inputs=report.inputs,
        diagnostics=report.diagnostics,
        normative=report.normative,
    )


def run_trial(task: TrialTask) -> list[ReportRow]:
    """Execute one trial and return its report rows in check order."""

    logging_conf.set_run_context(task.suite, task.trial, task.kind)
    try:
        reports = SUITE_RUNNERS[task.suite](task, task.generator())
    except Exception as exc:
        LOGGER.error("trial failed: %s: %s", exc.__class__.__name__, exc)
        raise
    finally:
        logging_conf.set_run_context(None)
    rows = [
        to_row(task.suite, task.config.seed, task.trial, _with_override(report, task.config))
        for report in reports
    ]
    LOGGER.debug(
        "trial %s/%d done: %d check(s), %d failed",
        task.suite,
        task.trial,
        len(rows),
        sum(not row.passed for row in rows),
    )
    return rows
