"""Emulated actuators: relay, buzzer, 16x2 LCD and the AT-command GSM modem.

These execute the effect values emitted by the meter. The modem keeps an
append-only outbox plus a plain-text transcript of the AT dialogue for
every message sent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .meter import BuzzerSet, DisplaySet, Effect, RelaySet, SendSms
from .money import CAP_MICRO, Money

LCD_COLS = 16
SMS_MAX_CHARS = 160
CTRL_Z = "\x1a"


class PeripheralError(Exception):
    pass


class BodyTooLong(PeripheralError):
    pass


class ValueOutOfRange(PeripheralError):
    pass


@dataclass(frozen=True)
class LcdDisplay:
    line1: str
    line2: str

    def __post_init__(self) -> None:
        if len(self.line1) != LCD_COLS or len(self.line2) != LCD_COLS:
            raise ValueError(
                f"LCD lines must be exactly {LCD_COLS} chars, "
                f"got {len(self.line1)}/{len(self.line2)}"
            )


def lcd_render(power_w: int, credit: Money) -> LcdDisplay:
    """Fixed 16x2 layout: 'PWR:   57W      ' / 'CR: RM005.00    '."""
    if not 0 <= power_w <= 9999:
        raise ValueOutOfRange(f"power {power_w} W outside displayable 0..9999")
    if credit.micro_rm > CAP_MICRO:
        raise ValueOutOfRange(f"credit {credit} above cap")
    line1 = f"PWR:{power_w:5d}W".ljust(LCD_COLS)
    rm, dd = credit.sen // 100, credit.sen % 100
    line2 = f"CR: RM{rm:03d}.{dd:02d}".ljust(LCD_COLS)
    return LcdDisplay(line1, line2)


def default_alert_body(credit: Money) -> str:
    return (
        f"ALERT: prepaid meter credit low. RM{credit.sen // 100}.{credit.sen % 100:02d} "
        "remaining. Supply cuts off at RM0.00."
    )


@dataclass(frozen=True)
class SmsMessage:
    msisdn: str
    body: str
    sent_at: float  # simulated seconds
    sequence: int

    def __post_init__(self) -> None:
        if not self.msisdn:
            raise ValueError("msisdn must be non-empty")
        if len(self.body) > SMS_MAX_CHARS:
            raise ValueError(f"body is {len(self.body)} chars, max {SMS_MAX_CHARS}")


class GsmModem:
    """Text-mode (CMGF=1) modem emulator with an append-only outbox."""

    def __init__(self) -> None:
        self.outbox: list[SmsMessage] = []
        self.transcript: list[str] = []
        self._next_seq = 1

    def send_sms(self, msisdn: str, body: str, now: float) -> SmsMessage:
        if len(body) > SMS_MAX_CHARS:
            raise BodyTooLong(f"body is {len(body)} chars, max {SMS_MAX_CHARS}")
        message = SmsMessage(msisdn, body, now, self._next_seq)
        self.transcript += self._dialogue(message)
        self.outbox.append(message)
        self._next_seq += 1
        return message

    def restore(self, messages: list[SmsMessage]) -> None:
        """Reload a persisted outbox, regenerating the AT transcripts."""
        for message in messages:
            self.transcript += self._dialogue(message)
            self.outbox.append(message)
            self._next_seq = max(self._next_seq, message.sequence + 1)

    @staticmethod
    def _dialogue(message: SmsMessage) -> list[str]:
        return [
            "AT",
            "OK",
            "AT+CMGF=1",
            "OK",
            f'AT+CMGS="{message.msisdn}"',
            "> ",
            message.body + CTRL_Z,
            f"+CMGS: {message.sequence}",
            "OK",
        ]

    def transcript_text(self) -> str:
        return "\n".join(self.transcript)


@dataclass
class PeripheralSet:
    """Everything the controller drives, owned by one simulation loop."""

    modem: GsmModem = field(default_factory=GsmModem)
    relay_closed: bool = False
    buzzer_on: bool = False
    lcd: LcdDisplay = field(default_factory=lambda: lcd_render(0, Money.zero()))
    alert_body: Callable[[Money], str] = default_alert_body

    def reset_actuators(self) -> None:
        self.relay_closed = False
        self.buzzer_on = False
        self.lcd = lcd_render(0, Money.zero())


def apply_effects(
    peripherals: PeripheralSet, effects: list[Effect], now: float = 0.0
) -> list[SmsMessage]:
    """Execute effects in list order; returns any messages sent.

    Repeating an identical RelaySet/BuzzerSet is a no-op by construction.
    """
    sent: list[SmsMessage] = []
    for effect in effects:
        if isinstance(effect, RelaySet):
            peripherals.relay_closed = effect.closed
        elif isinstance(effect, BuzzerSet):
            peripherals.buzzer_on = effect.on
        elif isinstance(effect, DisplaySet):
            peripherals.lcd = lcd_render(effect.power_w, effect.credit)
        elif isinstance(effect, SendSms):
            body = peripherals.alert_body(effect.credit)
            sent.append(peripherals.modem.send_sms(effect.msisdn, body, now))
        else:
            raise PeripheralError(f"unknown effect {effect!r}")
    return sent
