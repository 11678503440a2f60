"""Exceptions raised by bamlab.

Every failure the library reports derives from :class:`BamlabError`, so the
command line can map the whole family onto one exit code without resorting to
catch-all handlers.
"""

from __future__ import annotations

import typing as typ

if typ.TYPE_CHECKING:
    from bamlab.model import History


class BamlabError(RuntimeError):
    """Base class for every bamlab failure."""


class InvalidDistributionError(BamlabError):
    """Raised when a stage distribution violates its invariants."""


class InstanceFormatError(BamlabError):
    """Raised when an instance or mechanism file cannot be decoded."""


class ConfigError(BamlabError):
    """Raised when run settings are out of range or malformed."""


class InvalidParameterError(BamlabError):
    """Raised when a numeric parameter lies outside its admissible range."""


class UnsupportedContinuousError(BamlabError):
    """Raised when an exact routine meets an equal-revenue stage."""


class UnsupportedMultiItemError(BamlabError):
    """Raised when a one-item routine meets a multi-item stage."""


class IncompleteMechanismError(BamlabError):
    """Raised when a direct mechanism lacks a node of the history tree."""


class BadHistoryError(BamlabError):
    """Raised when a history is not a valid prefix of the instance tree."""


class UseProvidedStageMechanismError(BamlabError):
    """Raised when no optimal stage mechanism is known for a multi-item stage."""


class ThetaOutOfRangeError(BamlabError):
    """Raised when a target bundle utility lies outside ``[0, Val]``."""


class SpendExceedsBalanceError(BamlabError):
    """Raised when a spend policy takes more than the current balance."""


class NegativeDepositError(BamlabError):
    """Raised when a deposit policy returns a negative amount."""


class UnreachableBalanceError(BamlabError):
    """Raised when a tabulated policy is queried at an unknown balance."""


class CoreBamInvalidError(BamlabError):
    """Raised when a conditional-utility specification fails validation."""

    def __init__(self, message: str, failed: tuple[str, ...]) -> None:
        super().__init__(message)
        self.failed = failed


class NotSymmetricOrNotICError(BamlabError):
    """Raised when a mechanism cannot be turned into a core BAM."""

    def __init__(self, message: str, failed: tuple[str, ...]) -> None:
        super().__init__(message)
        self.failed = failed


class NotExPostIRError(BamlabError):
    """Raised when a mechanism leaves some type path with negative utility."""

    def __init__(self, message: str, witness: History) -> None:
        super().__init__(message)
        self.witness = witness


class SigmaEnumerationTooLargeError(BamlabError):
    """Raised when enumerating every deterministic bit string is infeasible."""


class LpInfeasibleError(BamlabError):
    """Raised when a linear program has no feasible point."""


class LpUnboundedError(BamlabError):
    """Raised when a linear program has an unbounded objective."""


class LpSolverError(BamlabError):
    """Raised when the LP backend stops without a usable answer."""


class BadDeltaError(BamlabError):
    """Raised when a sandwich tolerance is not strictly positive."""


class NotConcaveError(BamlabError):
    """Raised when an oracle or breakpoint list is detectably non-concave."""


class DomainError(BamlabError):
    """Raised when a piecewise-linear function is queried outside its domain."""


class PromiseUnderflowError(BamlabError):
    """Raised when a realized promised utility drops below zero."""


class InstanceTooLargeError(BamlabError):
    """Raised when an exhaustive routine would exceed its node cap."""


__all__ = [
    "BadDeltaError",
    "BadHistoryError",
    "BamlabError",
    "ConfigError",
    "CoreBamInvalidError",
    "DomainError",
    "IncompleteMechanismError",
    "InstanceFormatError",
    "InstanceTooLargeError",
    "InvalidDistributionError",
    "InvalidParameterError",
    "LpInfeasibleError",
    "LpSolverError",
    "LpUnboundedError",
    "NegativeDepositError",
    "NotConcaveError",
    "NotExPostIRError",
    "NotSymmetricOrNotICError",
    "PromiseUnderflowError",
    "SigmaEnumerationTooLargeError",
    "SpendExceedsBalanceError",
    "ThetaOutOfRangeError",
    "UnreachableBalanceError",
    "UnsupportedContinuousError",
    "UnsupportedMultiItemError",
    "UseProvidedStageMechanismError",
]
