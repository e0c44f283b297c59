"""Three-valued truth values with Kleene connectives."""

from __future__ import annotations

from enum import Enum
from typing import Iterable


class Verdict(Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    @property
    def symbol(self) -> str:
        return {"true": "⊤", "false": "⊥", "unknown": "?"}[self.value]

    @classmethod
    def of(cls, value: bool) -> "Verdict":
        return cls.TRUE if value else cls.FALSE

    def negate(self) -> "Verdict":
        if self is Verdict.TRUE:
            return Verdict.FALSE
        if self is Verdict.FALSE:
            return Verdict.TRUE
        return Verdict.UNKNOWN

    def __str__(self) -> str:
        return self.symbol


def kleene_and(values: Iterable[Verdict]) -> Verdict:
    result = Verdict.TRUE
    for v in values:
        if v is Verdict.FALSE:
            return Verdict.FALSE
        if v is Verdict.UNKNOWN:
            result = Verdict.UNKNOWN
    return result


def kleene_or(values: Iterable[Verdict]) -> Verdict:
    result = Verdict.FALSE
    for v in values:
        if v is Verdict.TRUE:
            return Verdict.TRUE
        if v is Verdict.UNKNOWN:
            result = Verdict.UNKNOWN
    return result
