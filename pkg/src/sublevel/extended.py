"""Tagged extended reals.

Infinities are never stored as IEEE sentinels inside arithmetic; they are
explicit tags so that ``inf(empty) = +inf`` and ``sup(empty) = -inf`` are
total operations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable


@total_ordering
@dataclass(frozen=True)
class ExtendedReal:
    sign: int = 0  # -1 for -inf, +1 for +inf, 0 for a finite value
    value: float = 0.0

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"bad tag {self.sign}")
        if self.sign == 0 and not math.isfinite(self.value):
            raise ValueError("finite ExtendedReal needs a finite value; use ExtendedReal.of")

    @classmethod
    def of(cls, x) -> "ExtendedReal":
        if isinstance(x, ExtendedReal):
            return x
        x = float(x)
        if math.isnan(x):
            raise ValueError("NaN is not an extended real")
        if math.isinf(x):
            return cls(1 if x > 0 else -1, 0.0)
        return cls(0, x)

    @property
    def is_finite(self) -> bool:
        return self.sign == 0

    def _key(self):
        return (self.sign, self.value if self.sign == 0 else 0.0)

    def __lt__(self, other):
        other = ExtendedReal.of(other)
        return self._key() < other._key()

    def __eq__(self, other):
        try:
            other = ExtendedReal.of(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __float__(self):
        if self.sign:
            return math.inf if self.sign > 0 else -math.inf
        return self.value

    def to_json(self):
        if self.sign > 0:
            return "+inf"
        if self.sign < 0:
            return "-inf"
        return self.value

    @classmethod
    def from_json(cls, x) -> "ExtendedReal":
        if x == "+inf":
            return POS_INF
        if x == "-inf":
            return NEG_INF
        return cls.of(x)

    def __repr__(self):
        return str(self.to_json())


POS_INF = ExtendedReal(1)
NEG_INF = ExtendedReal(-1)


def inf_over(values: Iterable) -> ExtendedReal:
    """Infimum with the convention inf of the empty set = +inf."""
    return min((ExtendedReal.of(v) for v in values), default=POS_INF)


def sup_over(values: Iterable) -> ExtendedReal:
    """Supremum with the convention sup of the empty set = -inf."""
    return max((ExtendedReal.of(v) for v in values), default=NEG_INF)
