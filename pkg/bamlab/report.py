"""Verification verdicts with concrete witnesses."""

from __future__ import annotations

import dataclasses as dc
import typing as typ

if typ.TYPE_CHECKING:
    import collections.abc as cabc

MAX_WITNESSES_PER_CHECK = 5


@dc.dataclass(frozen=True)
class Witness:
    """A violated inequality ``lhs >= rhs`` located in the history tree."""

    constraint: str
    history: tuple[int, ...]
    deviation: tuple[int, ...] | None
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        """Amount by which ``lhs`` exceeds ``rhs``; negative when violated."""
        return self.lhs - self.rhs


@dc.dataclass(frozen=True)
class VerificationReport:
    """Named verdicts plus the witnesses backing every failed one."""

    verdicts: dict[str, bool]
    witnesses: tuple[Witness, ...] = ()

    @property
    def passed(self) -> bool:
        """Whether every verdict holds."""
        return all(self.verdicts.values())

    @property
    def failed(self) -> tuple[str, ...]:
        """Names of the failed verdicts."""
        return tuple(name for name, ok in self.verdicts.items() if not ok)

    def merged(self, other: VerificationReport) -> VerificationReport:
        """Combine two reports; a verdict present in both must hold in both."""
        verdicts = dict(self.verdicts)
        for name, ok in other.verdicts.items():
            verdicts[name] = verdicts.get(name, True) and ok
        return VerificationReport(verdicts, self.witnesses + other.witnesses)

    def as_record(self) -> dict[str, object]:
        """Plain mapping suitable for JSON encoding."""
        return {
            "passed": self.passed,
            "verdicts": self.verdicts,
            "witnesses": [
                {**dc.asdict(w), "slack": w.slack} for w in self.witnesses
            ],
        }


class ReportBuilder:
    """Accumulate inequality checks into a :class:`VerificationReport`."""

    def __init__(self, checks: cabc.Iterable[str], tol: float) -> None:
        self._verdicts = dict.fromkeys(checks, True)
        self._witnesses: list[Witness] = []
        self._counts = dict.fromkeys(self._verdicts, 0)
        self.tol = tol

    def require(self, witness: Witness) -> bool:
        """Record ``lhs >= rhs - tol``; returns whether it held."""
        if witness.lhs >= witness.rhs - self.tol:
            return True
        self.fail(witness)
        return False

    def require_close(self, witness: Witness) -> bool:
        """Record ``|lhs - rhs| <= tol``."""
        if abs(witness.lhs - witness.rhs) <= self.tol:
            return True
        self.fail(witness)
        return False

    def fail(self, witness: Witness) -> None:
        """Mark ``witness.constraint`` as failed, keeping a bounded witness list."""
        name = witness.constraint
        self._verdicts[name] = False
        count = self._counts.get(name, 0)
        if count < MAX_WITNESSES_PER_CHECK:
            self._witnesses.append(witness)
        self._counts[name] = count + 1

    def build(self) -> VerificationReport:
        """Freeze the accumulated verdicts."""
        return VerificationReport(dict(self._verdicts), tuple(self._witnesses))


__all__ = ["ReportBuilder", "VerificationReport", "Witness"]
