"""Simulator of an RFID-card prepaid electricity meter.

Emulated read/write card and top-up station (byte-exact serial frames),
analog current sensing through a calibration table, a credit-deducting
meter state machine with relay/LCD/buzzer/SMS peripherals, a scenario
harness, and an HTTP gateway with a server-sent event stream.
"""

from .card import (
    CommandCode,
    Frame,
    FrameError,
    RfidCard,
    apply_command,
    card_checksum,
    card_with_credit,
    decode_frame,
    encode_frame,
)
from .meter import (
    Meter,
    MeterConfig,
    MeterSnapshot,
    MeterState,
    Tariff,
    compute_power,
    deduct,
)
from .money import Money, MoneyRangeError
from .peripherals import GsmModem, LcdDisplay, PeripheralSet, SmsMessage, apply_effects, lcd_render
from .sensing import CalibrationTable, ShuntConfig, default_calibration, lookup_current, sense_vout, shunt_voltage
from .sim import (
    EventRecord,
    LoadProfile,
    Scenario,
    TariffFit,
    export_trace_csv,
    fit_tariff,
    run_scenario,
    table1_scenario,
)
from .station import SerialChannel, StationState

__version__ = "0.1.0"

__all__ = [
    "CalibrationTable",
    "CommandCode",
    "EventRecord",
    "Frame",
    "FrameError",
    "GsmModem",
    "LcdDisplay",
    "LoadProfile",
    "Meter",
    "MeterConfig",
    "MeterSnapshot",
    "MeterState",
    "Money",
    "MoneyRangeError",
    "PeripheralSet",
    "RfidCard",
    "Scenario",
    "SerialChannel",
    "ShuntConfig",
    "SmsMessage",
    "StationState",
    "Tariff",
    "TariffFit",
    "apply_command",
    "apply_effects",
    "card_checksum",
    "card_with_credit",
    "compute_power",
    "decode_frame",
    "deduct",
    "default_calibration",
    "encode_frame",
    "export_trace_csv",
    "fit_tariff",
    "lcd_render",
    "lookup_current",
    "run_scenario",
    "sense_vout",
    "shunt_voltage",
    "table1_scenario",
    "__version__",
]
