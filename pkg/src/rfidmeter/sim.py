"""Deterministic discrete-time driver wiring loads through sensing to the meter.

Runs declarative scenarios (including the built-in three-bulb cutoff
experiment), fits the affine tariff to cutoff observations, and emits
traces as EventRecord lists exportable to CSV and JSONL.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Any

import yaml

from .card import RfidCard
from .meter import (
    BuzzerSet,
    DisplaySet,
    Effect,
    Meter,
    MeterConfig,
    MeterSnapshot,
    RelaySet,
    SendSms,
    Tariff,
)
from .money import MICRO_PER_RM, Money
from .peripherals import PeripheralSet, apply_effects
from .sensing import CalibrationTable, SensingError, default_calibration, sense_vout

# Cutoff observations from the three-bulb experiment: (true watts, seconds).
# Cutoff lands somewhere inside a 5 s sampling window; the midpoint is used.
TABLE1_OBSERVATIONS = [(57.0, 32.5), (24.0, 42.5), (14.0, 47.5)]

# The bulbs: rated watts on the box, measured watts actually drawn.
TABLE1_BULBS = [("bulb60", 60.0, 57.0), ("bulb15", 15.0, 14.0), ("bulb25", 25.0, 24.0)]

TABLE1_CREDIT = Money.from_rm(5)


class ScenarioInvalid(ValueError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field_name = field_name


class Underdetermined(ValueError):
    pass


class InfeasibleFit(ValueError):
    pass


@dataclass(frozen=True)
class LoadProfile:
    name: str
    rated_watts: float
    measured_watts: float  # true consumption driving the simulation

    def __post_init__(self) -> None:
        if not self.name:
            raise ScenarioInvalid("load.name", "must be non-empty")
        if self.measured_watts < 0:
            raise ScenarioInvalid(f"load {self.name}", "measured_watts must be >= 0")


@dataclass(frozen=True)
class ScheduleEntry:
    t: float
    load: str
    on: bool


@dataclass(frozen=True)
class Scenario:
    name: str
    initial_credit: Money
    loads: tuple[LoadProfile, ...]
    schedule: tuple[ScheduleEntry, ...]
    tick_seconds: float = 1.0
    duration_seconds: float = 60.0
    config: MeterConfig | None = None  # None defaults to the fitted tariff
    calibration: CalibrationTable | None = None


@dataclass(frozen=True)
class EventRecord:
    t: float
    kind: str  # tick | state_change | relay | buzzer | sms | display
    payload: dict[str, Any]

    def to_json_obj(self) -> dict[str, Any]:
        return {"t": self.t, "kind": self.kind, **self.payload}


@dataclass(frozen=True)
class TariffFit:
    tariff: Tariff
    base_rm_per_second: float
    rate_rm_per_watt_second: float
    residuals_seconds: tuple[float, ...]


def fit_tariff(observations: list[tuple[float, float]], credit: Money) -> TariffFit:
    """Least-squares fit of credit = (base + rate*P) * T, coefficients >= 0.

    Linearized as credit/T = base + rate*P, which is exact through two
    observations. Residuals are observed minus predicted cutoff seconds.
    """
    if credit.micro_rm <= 0:
        raise ValueError("credit must be positive to fit a tariff")
    for power, seconds in observations:
        if power < 0:
            raise ValueError(f"negative power in observation ({power}, {seconds})")
        if seconds <= 0:
            raise ValueError(f"non-positive cutoff time in observation ({power}, {seconds})")
    if len({p for p, _ in observations}) < 2:
        raise Underdetermined("need at least 2 observations with distinct powers")

    credit_rm = credit.micro_rm / MICRO_PER_RM
    ps = [p for p, _ in observations]
    ys = [credit_rm / t for _, t in observations]
    n = len(observations)

    mean_p = sum(ps) / n
    mean_y = sum(ys) / n
    sxx = sum((p - mean_p) ** 2 for p in ps)
    sxy = sum((p - mean_p) * (y - mean_y) for p, y in zip(ps, ys))
    rate = sxy / sxx
    base = mean_y - rate * mean_p

    if base < 0 or rate < 0:
        # Active-set fallback: pin one coefficient to 0, keep the better fit.
        candidates = [(mean_y, 0.0), (0.0, sum(p * y for p, y in zip(ps, ys)) / sum(p * p for p in ps))]
        feasible = [(b, r) for b, r in candidates if b >= 0 and r >= 0 and (b > 0 or r > 0)]
        if not feasible:
            raise InfeasibleFit("no non-negative tariff fits these observations")
        base, rate = min(
            feasible, key=lambda br: sum((y - br[0] - br[1] * p) ** 2 for p, y in zip(ps, ys))
        )

    residuals = tuple(t - credit_rm / (base + rate * p) for p, t in observations)
    tariff = Tariff(base * MICRO_PER_RM, rate * MICRO_PER_RM)
    return TariffFit(tariff, base, rate, residuals)


def fitted_table1_tariff() -> Tariff:
    """The default tariff: fitted to the three-bulb cutoff observations."""
    return fit_tariff(TABLE1_OBSERVATIONS, TABLE1_CREDIT).tariff


def table1_scenario() -> list[Scenario]:
    """The built-in experiment: RM5, one bulb each, 60 s at 1 s ticks."""
    scenarios = []
    for idx, (name, rated, measured) in enumerate(TABLE1_BULBS, start=1):
        scenarios.append(
            Scenario(
                name=f"table1-bulb{idx}",
                initial_credit=TABLE1_CREDIT,
                loads=(LoadProfile(name, rated, measured),),
                schedule=(ScheduleEntry(0.0, name, True),),
                tick_seconds=1.0,
                duration_seconds=60.0,
            )
        )
    return scenarios


def builtin_scenario(name: str) -> Scenario | None:
    for scenario in table1_scenario():
        if scenario.name == name:
            return scenario
    return None


def _validate(scenario: Scenario) -> None:
    if scenario.tick_seconds <= 0:
        raise ScenarioInvalid("tick_seconds", f"must be > 0, got {scenario.tick_seconds}")
    if scenario.duration_seconds < 0:
        raise ScenarioInvalid("duration_seconds", f"must be >= 0, got {scenario.duration_seconds}")
    names = {load.name for load in scenario.loads}
    if len(names) != len(scenario.loads):
        raise ScenarioInvalid("loads", "duplicate load names")
    for entry in scenario.schedule:
        if entry.load not in names:
            raise ScenarioInvalid("schedule", f"unknown load {entry.load!r}")
        if not 0 <= entry.t <= scenario.duration_seconds:
            raise ScenarioInvalid(
                "schedule", f"t={entry.t} outside [0, {scenario.duration_seconds}]"
            )


class TickEventMapper:
    """Turns one meter tick plus its effects into trace EventRecords.

    Shared by the batch harness and the live gateway loop so both emit the
    same vocabulary: a `tick` record per tick and edge records for state,
    relay, buzzer, SMS and LCD changes.
    """

    def __init__(self, peripherals: PeripheralSet):
        self.peripherals = peripherals
        self._last_state: str | None = None
        self._last_lcd: tuple[str, str] | None = None

    def on_insert(self, snapshot: MeterSnapshot, effects: list[Effect], t: float) -> list[EventRecord]:
        sent = apply_effects(self.peripherals, effects, now=t)
        records = self._state_records(snapshot, t)
        records += self._edge_records(effects, sent, t)
        return records

    def on_tick(self, snapshot: MeterSnapshot, effects: list[Effect], t: float) -> list[EventRecord]:
        sent = apply_effects(self.peripherals, effects, now=t)
        records = [
            EventRecord(
                t,
                "tick",
                {
                    "state": snapshot.state.value,
                    "power_w": snapshot.displayed_power,
                    "credit_micro": snapshot.credit.micro_rm,
                    "credit_rm": snapshot.credit.rm_6dp(),
                    "relay": snapshot.relay_closed,
                    "buzzer": snapshot.buzzer_active,
                },
            )
        ]
        records += self._state_records(snapshot, t)
        records += self._edge_records(effects, sent, t)
        return records

    def _state_records(self, snapshot: MeterSnapshot, t: float) -> list[EventRecord]:
        records = []
        if self._last_state is not None and snapshot.state.value != self._last_state:
            records.append(
                EventRecord(t, "state_change", {"from": self._last_state, "to": snapshot.state.value})
            )
        self._last_state = snapshot.state.value
        return records

    def _edge_records(
        self, effects: list[Effect], sent: list, t: float
    ) -> list[EventRecord]:
        records = []
        sms_iter = iter(sent)
        for effect in effects:
            if isinstance(effect, RelaySet):
                records.append(EventRecord(t, "relay", {"closed": effect.closed}))
            elif isinstance(effect, BuzzerSet):
                records.append(EventRecord(t, "buzzer", {"on": effect.on}))
            elif isinstance(effect, SendSms):
                message = next(sms_iter)
                records.append(
                    EventRecord(
                        t,
                        "sms",
                        {
                            "msisdn": message.msisdn,
                            "body": message.body,
                            "sequence": message.sequence,
                            "sent_at": message.sent_at,
                        },
                    )
                )
            elif isinstance(effect, DisplaySet):
                lcd = (self.peripherals.lcd.line1, self.peripherals.lcd.line2)
                if lcd != self._last_lcd:
                    records.append(EventRecord(t, "display", {"line1": lcd[0], "line2": lcd[1]}))
                    self._last_lcd = lcd
        return records


def run_scenario(scenario: Scenario) -> list[EventRecord]:
    """Run one scenario start to finish; the trace is fully deterministic.

    The meter keeps ticking after cutoff (trailing rows show zero power),
    matching how the experiment logs the full observation window.
    """
    _validate(scenario)
    config = scenario.config
    if config is None:
        config = MeterConfig(tariff=fitted_table1_tariff(), tick_seconds=scenario.tick_seconds)
    calibration = scenario.calibration if scenario.calibration is not None else default_calibration()

    meter = Meter(config, calibration)
    peripherals = PeripheralSet()
    mapper = TickEventMapper(peripherals)
    mapper._last_state = meter.state.value

    trace: list[EventRecord] = []
    card = RfidCard.make(b"\x05" * 8, scenario.initial_credit)
    if scenario.initial_credit.micro_rm > 0:
        _, effects = meter.insert_card(card)
        trace += mapper.on_insert(meter.snapshot(), effects, 0.0)

    on_loads: set[str] = set()
    by_name = {load.name: load for load in scenario.loads}
    pending = sorted(scenario.schedule, key=lambda e: e.t)
    pending_idx = 0

    ticks = round(scenario.duration_seconds / scenario.tick_seconds)
    for k in range(1, ticks + 1):
        t_start = (k - 1) * scenario.tick_seconds
        t_end = k * scenario.tick_seconds
        while pending_idx < len(pending) and pending[pending_idx].t <= t_start:
            entry = pending[pending_idx]
            (on_loads.add if entry.on else on_loads.discard)(entry.load)
            pending_idx += 1

        watts = sum(by_name[name].measured_watts for name in on_loads)
        try:
            vout = sense_vout(watts, calibration, config.mains_voltage)
        except SensingError as exc:
            exc.args = (f"{exc} (loads on: {sorted(on_loads)})",)
            raise
        snapshot, effects = meter.tick(vout, scenario.tick_seconds)
        trace += mapper.on_tick(replace(snapshot, elapsed=t_end), effects, t_end)

    return trace


def export_trace_csv(trace: list[EventRecord]) -> str:
    """CSV of the tick rows: t,state,power_w,credit_rm,relay,buzzer."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t", "state", "power_w", "credit_rm", "relay", "buzzer"])
    for record in trace:
        if record.kind != "tick":
            continue
        p = record.payload
        writer.writerow(
            [
                f"{record.t:g}",
                p["state"],
                p["power_w"],
                p["credit_rm"],
                "closed" if p["relay"] else "open",
                "on" if p["buzzer"] else "off",
            ]
        )
    return out.getvalue()


def export_trace_jsonl(trace: list[EventRecord]) -> str:
    return "".join(json.dumps(record.to_json_obj(), sort_keys=True) + "\n" for record in trace)


def _money_field(raw: Any, field_name: str) -> Money:
    try:
        return Money.from_rm(raw)
    except (ValueError, TypeError) as exc:
        raise ScenarioInvalid(field_name, str(exc)) from exc


def parse_scenario(doc: dict[str, Any], name: str = "scenario") -> Scenario:
    """Build a Scenario from a parsed YAML/JSON document, field-checked."""
    if not isinstance(doc, dict):
        raise ScenarioInvalid("document", f"expected a mapping, got {type(doc).__name__}")
    unknown = set(doc) - {
        "name",
        "initial_credit_rm",
        "loads",
        "schedule",
        "tick_seconds",
        "duration_seconds",
        "meter",
    }
    if unknown:
        raise ScenarioInvalid("document", f"unknown fields {sorted(unknown)}")
    if "initial_credit_rm" not in doc:
        raise ScenarioInvalid("initial_credit_rm", "required field missing")
    credit = _money_field(doc["initial_credit_rm"], "initial_credit_rm")

    loads = []
    for i, raw in enumerate(doc.get("loads", [])):
        try:
            loads.append(
                LoadProfile(
                    name=str(raw["name"]),
                    rated_watts=float(raw.get("rated_watts", raw["measured_watts"])),
                    measured_watts=float(raw["measured_watts"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioInvalid(f"loads[{i}]", f"bad load entry {raw!r}: {exc}") from exc

    schedule = []
    for i, raw in enumerate(doc.get("schedule", [])):
        try:
            entry = dict(raw)
            if True in entry and "on" not in entry:
                entry["on"] = entry.pop(True)  # YAML 1.1 reads a bare `on:` key as boolean
            schedule.append(
                ScheduleEntry(t=float(entry["t"]), load=str(entry["load"]), on=bool(entry["on"]))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioInvalid(f"schedule[{i}]", f"bad entry {raw!r}: {exc}") from exc

    config = None
    meter_doc = doc.get("meter")
    if meter_doc is not None:
        config = parse_meter_config(
            meter_doc, tick_seconds=float(doc.get("tick_seconds", 1.0))
        )

    scenario = Scenario(
        name=str(doc.get("name", name)),
        initial_credit=credit,
        loads=tuple(loads),
        schedule=tuple(schedule),
        tick_seconds=float(doc.get("tick_seconds", 1.0)),
        duration_seconds=float(doc.get("duration_seconds", 60.0)),
        config=config,
    )
    _validate(scenario)
    return scenario


def parse_meter_config(doc: dict[str, Any], tick_seconds: float = 1.0) -> MeterConfig:
    unknown = set(doc) - {
        "mains_voltage",
        "low_credit_threshold_rm",
        "alert_msisdn",
        "tariff",
    }
    if unknown:
        raise ScenarioInvalid("meter", f"unknown fields {sorted(unknown)}")
    tariff_doc = doc.get("tariff")
    if tariff_doc is None:
        tariff = fitted_table1_tariff()
    else:
        tariff = Tariff(
            base_per_second=float(tariff_doc.get("base_rm_per_second", 0.0)) * MICRO_PER_RM,
            rate_per_watt_second=float(tariff_doc.get("rate_rm_per_watt_second", 0.0))
            * MICRO_PER_RM,
        )
    return MeterConfig(
        tariff=tariff,
        mains_voltage=float(doc.get("mains_voltage", 240.0)),
        low_credit_threshold=_money_field(
            doc.get("low_credit_threshold_rm", "0.50"), "meter.low_credit_threshold_rm"
        ),
        tick_seconds=tick_seconds,
        alert_msisdn=str(doc.get("alert_msisdn", "+60123456789")),
    )


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioInvalid("document", f"bad YAML in {path}: {exc}") from exc
    return parse_scenario(doc, name=path)
