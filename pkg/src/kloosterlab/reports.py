from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class BoundReport:
    """Measured size of a quantity against a bound with implied constant 1.

    A report never decides pass or fail; callers compare ``ratio`` with
    whatever empirical constant they are calibrating.
    """

    family: str
    lhs: float
    rhs: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.lhs < 0 or self.rhs < 0 or math.isnan(self.lhs) or math.isnan(self.rhs):
            raise ValueError(f"bad report values lhs={self.lhs} rhs={self.rhs}")

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs

    def as_row(self) -> dict[str, Any]:
        row = dict(self.metadata)
        row.update(family=self.family, lhs=self.lhs, rhs=self.rhs, ratio=self.ratio)
        return row


def log_proxy(x: float, power: float) -> float:
    """Stand-in for an x^epsilon factor: (log x)^power, floored at 1."""
    return max(1.0, math.log(max(x, math.e))) ** power
