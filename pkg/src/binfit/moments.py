"""Moment values that may be finite, infinite, or undefined, and their summaries."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field


class MomentKind(enum.Enum):
    FINITE = "Finite"
    PLUS_INFINITY = "PlusInfinity"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class MomentValue:
    kind: MomentKind
    value: float | None = None

    def __post_init__(self):
        if self.kind is MomentKind.FINITE:
            if self.value is None or not math.isfinite(self.value):
                raise ValueError("a Finite moment needs a finite value")
        elif self.value is not None:
            raise ValueError(f"{self.kind.value} moments carry no value")

    @classmethod
    def finite(cls, value: float) -> "MomentValue":
        value = float(value)
        if not math.isfinite(value):
            # overflow of a convergent integral is still an infinite answer
            return cls.plus_infinity() if value > 0 else cls.indeterminate()
        return cls(MomentKind.FINITE, value)

    @classmethod
    def plus_infinity(cls) -> "MomentValue":
        return cls(MomentKind.PLUS_INFINITY)

    @classmethod
    def indeterminate(cls) -> "MomentValue":
        return cls(MomentKind.INDETERMINATE)

    @property
    def is_finite(self) -> bool:
        return self.kind is MomentKind.FINITE

    def as_float(self) -> float:
        """``value`` for finite moments, ``inf`` or ``nan`` otherwise."""
        if self.kind is MomentKind.FINITE:
            return self.value
        return math.inf if self.kind is MomentKind.PLUS_INFINITY else math.nan

    def __str__(self) -> str:
        return repr(self.value) if self.is_finite else self.kind.value


VARIANCE_CLAMPED = "VarianceClamped"


@dataclass(frozen=True)
class MomentSummary:
    mean: MomentValue
    second_moment: MomentValue
    variance: MomentValue
    sd: MomentValue
    cv: MomentValue
    flags: frozenset = field(default_factory=frozenset)


def _worst(*values: MomentValue) -> MomentValue | None:
    kinds = {v.kind for v in values}
    if MomentKind.INDETERMINATE in kinds:
        return MomentValue.indeterminate()
    if MomentKind.PLUS_INFINITY in kinds:
        return MomentValue.plus_infinity()
    return None


def summarize_moments(m1: MomentValue, m2: MomentValue) -> MomentSummary:
    """Derive variance, sd and coefficient of variation from raw moments.

    Non-finite inputs propagate: an indeterminate mean makes everything
    indeterminate, an infinite second moment with a finite mean gives an
    infinite variance, sd and cv. A slightly negative variance from
    floating-point cancellation is clamped to zero and flagged.
    """
    flags = set()
    if m1.kind is MomentKind.INDETERMINATE:
        nd = MomentValue.indeterminate()
        return MomentSummary(m1, m2, nd, nd, nd)
    if not m1.is_finite:
        # infinite mean: the second moment is infinite too and the variance is undefined
        nd = MomentValue.indeterminate()
        return MomentSummary(m1, m2, nd, nd, nd)
    worst = _worst(m2)
    if worst is not None:
        cv = worst if m1.value > 0 else MomentValue.indeterminate()
        return MomentSummary(m1, m2, worst, worst, cv)

    var = m2.value - m1.value ** 2
    if var < 0:
        flags.add(VARIANCE_CLAMPED)
        var = 0.0
    variance = MomentValue.finite(var)
    sd = MomentValue.finite(math.sqrt(var)) if variance.is_finite else variance
    if m1.value > 0 and sd.is_finite:
        cv = MomentValue.finite(sd.value / m1.value)
    elif m1.value > 0:
        cv = sd
    else:
        cv = MomentValue.indeterminate()
    return MomentSummary(m1, m2, variance, sd, cv, frozenset(flags))
