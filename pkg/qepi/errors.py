"""Exception hierarchy shared by every qepi service."""

from __future__ import annotations

from dataclasses import dataclass


class QepiError(Exception):
    """Base class for all errors raised by the toolkit."""


class DomainError(QepiError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionMismatch(QepiError, ValueError):
    """Operands live on incompatible mode counts or Hilbert spaces."""


class NonPositiveCovariance(QepiError, ValueError):
    """A covariance matrix is not symmetric positive definite."""


class PairingFailure(QepiError, ArithmeticError):
    """Eigenvalues of J·γ did not come in ±iν pairs within tolerance."""


class UncertaintyViolation(QepiError, ValueError):
    """γ + iJ fails to be positive semidefinite."""


class TruncationBudgetExceeded(QepiError):
    """A Fock-space state leaks more population into the top level than allowed."""


class StepTooLarge(TruncationBudgetExceeded):
    """A finite-difference displacement pushed the state past the truncation budget."""


class SupportMismatch(QepiError):
    """ρ carries weight outside the numerical support of σ."""


class RankDeficient(QepiError):
    """The divergence-based Fisher information is undefined for this state."""


class StiffnessFailure(QepiError):
    """The adaptive integrator collapsed its step or drifted in trace."""


class ClockOverflow(QepiError):
    """A diffusion clock ran past the truncation-safe horizon."""


@dataclass(frozen=True)
class ConfigIssue:
    """One validation problem inside a run configuration."""

    field: str
    message: str
    line: int | None = None

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.field}: {self.message}"


class ConfigError(QepiError, ValueError):
    """The run configuration is malformed; carries one issue per problem."""

    def __init__(self, issues: list[ConfigIssue]) -> None:
        self.issues = list(issues)
        super().__init__("; ".join(str(issue) for issue in self.issues))


class ParseError(QepiError, ValueError):
    """A state-constructor spec could not be parsed."""

    def __init__(self, message: str, position: int) -> None:
        self.position = position
        super().__init__(f"{message} (at position {position})")
