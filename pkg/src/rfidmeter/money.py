"""Integer credit arithmetic in micro-Ringgit.

1 RM = 100 sen = 1,000,000 micro-RM. Credit is stored as a non-negative
integer count of micro-RM so repeated per-tick deductions never drift;
the wire and the stores carry whole sen.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

MICRO_PER_RM = 1_000_000
MICRO_PER_SEN = 10_000
SEN_PER_RM = 100

# RM 10,000 hard cap; writes above it are rejected.
CAP_MICRO = 10_000 * MICRO_PER_RM
CAP_SEN = CAP_MICRO // MICRO_PER_SEN


class MoneyRangeError(ValueError):
    """Amount negative or above the RM 10,000 cap."""


@dataclass(frozen=True, order=True)
class Money:
    """An exact credit amount in micro-RM."""

    micro_rm: int

    def __post_init__(self) -> None:
        if not isinstance(self.micro_rm, int):
            raise TypeError(f"micro_rm must be int, got {type(self.micro_rm).__name__}")
        if self.micro_rm < 0:
            raise MoneyRangeError(f"credit cannot be negative: {self.micro_rm} micro-RM")
        if self.micro_rm > CAP_MICRO:
            raise MoneyRangeError(
                f"credit above RM 10,000 cap: {self.micro_rm} micro-RM > {CAP_MICRO}"
            )

    @classmethod
    def zero(cls) -> "Money":
        return cls(0)

    @classmethod
    def from_sen(cls, sen: int) -> "Money":
        if not isinstance(sen, int):
            raise TypeError(f"sen must be int, got {type(sen).__name__}")
        return cls(sen * MICRO_PER_SEN)

    @classmethod
    def from_rm(cls, amount: "int | float | str | Decimal") -> "Money":
        """Parse an RM amount; rejects anything finer than one micro-RM."""
        try:
            dec = Decimal(str(amount))
        except InvalidOperation as exc:
            raise ValueError(f"not a valid RM amount: {amount!r}") from exc
        micro = dec * MICRO_PER_RM
        if micro != micro.to_integral_value():
            raise ValueError(f"amount finer than 1 micro-RM: {amount!r}")
        return cls(int(micro))

    @property
    def sen(self) -> int:
        """Whole sen, rounded down (the wire resolution)."""
        return self.micro_rm // MICRO_PER_SEN

    @property
    def is_whole_sen(self) -> bool:
        return self.micro_rm % MICRO_PER_SEN == 0

    def rm_2dp(self) -> str:
        """Two-decimal RM text, floored to whole sen, e.g. '5.00'."""
        return f"{self.sen // SEN_PER_RM}.{self.sen % SEN_PER_RM:02d}"

    def rm_6dp(self) -> str:
        """Exact six-decimal RM text, e.g. '4.846154'."""
        return f"{self.micro_rm // MICRO_PER_RM}.{self.micro_rm % MICRO_PER_RM:06d}"

    def __str__(self) -> str:
        return f"RM{self.rm_2dp()}"
