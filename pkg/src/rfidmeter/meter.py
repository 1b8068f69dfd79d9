"""Prepaid meter controller: card acceptance, per-tick deduction, cutoff.

The meter is a deterministic state machine driven by tick(vout, dt).
Peripheral intent (relay, buzzer, LCD, SMS) is emitted as effect values in
execution order; peripherals.apply_effects carries them out. One meter
instance is a single logical thread: callers serialize insert_card, tick
and snapshot externally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

from .card import RfidCard, card_with_credit
from .money import Money
from .sensing import CalibrationTable, NegativeCurrent, default_calibration, lookup_current


class MeterError(Exception):
    pass


class InvalidConfig(MeterError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field_name = field_name
        self.reason = reason


class InvalidCard(MeterError):
    pass


class WrongState(MeterError):
    pass


class MeterState(Enum):
    AWAITING_CARD = "AwaitingCard"
    ACTIVE = "Active"
    LOW_CREDIT = "LowCredit"
    CUT_OFF = "CutOff"


# Relay is closed exactly in these states; buzzer sounds only in LOW_CREDIT.
_RELAY_CLOSED_STATES = (MeterState.ACTIVE, MeterState.LOW_CREDIT)


@dataclass(frozen=True)
class Tariff:
    """Affine deduction rule: charge = (base + rate * power) * dt.

    Units are micro-RM per second and micro-RM per watt-second. A pure
    kWh-style tariff is base=0; a standing charge alone is rate=0.
    """

    base_per_second: float
    rate_per_watt_second: float

    def __post_init__(self) -> None:
        if self.base_per_second < 0:
            raise InvalidConfig("tariff.base_per_second", "must be >= 0")
        if self.rate_per_watt_second < 0:
            raise InvalidConfig("tariff.rate_per_watt_second", "must be >= 0")
        if self.base_per_second == 0 and self.rate_per_watt_second == 0:
            raise InvalidConfig("tariff", "base and rate cannot both be 0")


@dataclass(frozen=True)
class MeterConfig:
    tariff: Tariff
    mains_voltage: float = 240.0
    low_credit_threshold: Money = Money.from_rm("0.50")
    tick_seconds: float = 1.0
    alert_msisdn: str = "+60123456789"

    def __post_init__(self) -> None:
        if self.mains_voltage <= 0:
            raise InvalidConfig("mains_voltage", f"must be > 0, got {self.mains_voltage}")
        if self.tick_seconds <= 0:
            raise InvalidConfig("tick_seconds", f"must be > 0, got {self.tick_seconds}")
        if not self.alert_msisdn:
            raise InvalidConfig("alert_msisdn", "must be non-empty")


@dataclass(frozen=True)
class MeterSnapshot:
    state: MeterState
    displayed_power: int  # watts, 0 whenever relay open
    credit: Money
    relay_closed: bool
    buzzer_active: bool
    elapsed: float  # simulated seconds


@dataclass(frozen=True)
class RelaySet:
    closed: bool


@dataclass(frozen=True)
class BuzzerSet:
    on: bool


@dataclass(frozen=True)
class DisplaySet:
    power_w: int
    credit: Money


@dataclass(frozen=True)
class SendSms:
    msisdn: str
    credit: Money


Effect = Union[RelaySet, BuzzerSet, DisplaySet, SendSms]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def compute_power(current: float, mains: float) -> float:
    """Active power of the resistive load: mains voltage times current."""
    if current < 0:
        raise NegativeCurrent(f"current must be >= 0, got {current}")
    return mains * current


def deduct(credit: Money, power: float, dt: float, tariff: Tariff) -> Money:
    """Charge one interval against the credit, floored at zero.

    The product is rounded half-up to integer micro-RM so repeated ticks
    accumulate exactly.
    """
    charge = _round_half_up((tariff.base_per_second + tariff.rate_per_watt_second * power) * dt)
    return Money(max(0, credit.micro_rm - charge))


class Meter:
    """One metering point. See module docstring for the threading contract."""

    def __init__(self, config: MeterConfig, calibration: CalibrationTable | None = None):
        self.config = config
        self.calibration = calibration if calibration is not None else default_calibration()
        self.state = MeterState.AWAITING_CARD
        self.credit = Money.zero()
        self.elapsed = 0.0
        self._displayed_power = 0
        self._alert_sent = False

    @property
    def relay_closed(self) -> bool:
        return self.state in _RELAY_CLOSED_STATES

    @property
    def buzzer_active(self) -> bool:
        return self.state == MeterState.LOW_CREDIT

    def snapshot(self) -> MeterSnapshot:
        return MeterSnapshot(
            state=self.state,
            displayed_power=self._displayed_power if self.relay_closed else 0,
            credit=self.credit,
            relay_closed=self.relay_closed,
            buzzer_active=self.buzzer_active,
            elapsed=self.elapsed,
        )

    def insert_card(self, card: RfidCard) -> tuple[RfidCard, list[Effect]]:
        """Accept a card: its balance moves into the meter, the card is zeroed.

        Custody transfer prevents re-spending the same balance in a second
        meter. Returns the zeroed card and the peripheral effects. Only
        AwaitingCard and CutOff accept a card; an invalid checksum is
        rejected with no state change.
        """
        if self.state not in (MeterState.AWAITING_CARD, MeterState.CUT_OFF):
            raise WrongState(f"cannot accept a card while {self.state.value}")
        if not card.is_valid:
            raise InvalidCard(f"card {card.uid_hex} checksum mismatch")
        if card.credit.micro_rm == 0:
            # Nothing to transfer; no write happens and the state is unchanged.
            return card, []
        self.credit = card.credit
        self.state = MeterState.ACTIVE
        self._alert_sent = False
        self._displayed_power = 0
        zeroed = card_with_credit(card, Money.zero())
        effects: list[Effect] = [RelaySet(True), DisplaySet(0, self.credit)]
        return zeroed, effects

    def tick(self, vout: float, dt: float | None = None) -> tuple[MeterSnapshot, list[Effect]]:
        """Advance one interval: sense, compute power, deduct, transition.

        Effect order guarantees the low-credit SMS goes out before the
        relay opens, even when threshold and zero are crossed in one tick.
        """
        if dt is None:
            dt = self.config.tick_seconds
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")

        effects: list[Effect] = []
        old_state = self.state

        if not self.relay_closed:
            # No load is connected; credit is untouched.
            self._displayed_power = 0
            self.elapsed += dt
            effects.append(DisplaySet(0, self.credit))
            return self.snapshot(), effects

        current = lookup_current(vout, self.calibration)
        power = compute_power(current, self.config.mains_voltage)
        self.credit = deduct(self.credit, power, dt, self.config.tariff)
        self._displayed_power = _round_half_up(power)

        if self.credit.micro_rm == 0:
            new_state = MeterState.CUT_OFF
        elif self.credit <= self.config.low_credit_threshold:
            new_state = MeterState.LOW_CREDIT
        else:
            new_state = MeterState.ACTIVE

        # Alert exactly once per episode, before any cutoff in the same tick.
        if old_state == MeterState.ACTIVE and new_state != MeterState.ACTIVE and not self._alert_sent:
            effects.append(SendSms(self.config.alert_msisdn, self.credit))
            self._alert_sent = True

        if new_state == MeterState.LOW_CREDIT and old_state != MeterState.LOW_CREDIT:
            effects.append(BuzzerSet(True))
        elif old_state == MeterState.LOW_CREDIT and new_state != MeterState.LOW_CREDIT:
            effects.append(BuzzerSet(False))

        if new_state == MeterState.CUT_OFF:
            effects.append(RelaySet(False))
            self._displayed_power = 0

        self.state = new_state
        self.elapsed += dt
        effects.append(DisplaySet(self._displayed_power if self.relay_closed else 0, self.credit))
        return self.snapshot(), effects
