"""HTTP gateway hosting one live meter and one top-up station.

A single writer thread owns all mutable state (meter, station, stores,
load switches). API handlers enqueue closures and wait for the reply, so
commands apply strictly in arrival order and reads always see a state
that existed between transitions. The event log is the append-only
source of truth for the SSE stream; consumers resume by sequence number.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from typing import Any, Iterator

import yaml
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .meter import InvalidCard, Meter, MeterConfig, WrongState
from .money import CAP_SEN, Money
from .peripherals import PeripheralSet
from .sim import LoadProfile, TABLE1_BULBS, TickEventMapper, fitted_table1_tariff, parse_meter_config
from .sensing import sense_vout
from .station import SerialChannel, StationState
from .store import CardStore, EventLog, SmsOutboxStore, UnknownCard

PACE_WALL = "wall"
PACE_AFAP = "afap"

PORT_ENV_VAR = "RFIDMETER_PORT"
DEFAULT_PORT = 8000


class ApiError(Exception):
    """Maps to a 4xx response with body {code, message}."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _default_loads() -> tuple[LoadProfile, ...]:
    return tuple(LoadProfile(name, rated, measured) for name, rated, measured in TABLE1_BULBS)


@dataclass
class GatewayConfig:
    port: int = DEFAULT_PORT
    pace: str = PACE_WALL
    multiplier: float = 1.0  # simulated seconds per wall second (wall pace only)
    data_dir: str = "."
    meter: MeterConfig | None = None
    loads: tuple[LoadProfile, ...] = field(default_factory=_default_loads)

    def __post_init__(self) -> None:
        if self.pace not in (PACE_WALL, PACE_AFAP):
            raise ValueError(f"pace must be {PACE_WALL!r} or {PACE_AFAP!r}, got {self.pace!r}")
        if self.multiplier <= 0:
            raise ValueError(f"multiplier must be > 0, got {self.multiplier}")

    def resolved_meter(self) -> MeterConfig:
        if self.meter is not None:
            return self.meter
        return MeterConfig(tariff=fitted_table1_tariff())


def load_gateway_config(path: str) -> GatewayConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    unknown = set(doc) - {"port", "pace", "multiplier", "data_dir", "meter", "loads"}
    if unknown:
        raise ValueError(f"{path}: unknown fields {sorted(unknown)}")
    meter = None
    if "meter" in doc:
        meter = parse_meter_config(doc["meter"])
    loads = _default_loads()
    if "loads" in doc:
        loads = tuple(
            LoadProfile(
                name=str(raw["name"]),
                rated_watts=float(raw.get("rated_watts", raw["measured_watts"])),
                measured_watts=float(raw["measured_watts"]),
            )
            for raw in doc["loads"]
        )
    return GatewayConfig(
        port=int(doc.get("port", DEFAULT_PORT)),
        pace=str(doc.get("pace", PACE_WALL)),
        multiplier=float(doc.get("multiplier", 1.0)),
        data_dir=str(doc.get("data_dir", ".")),
        meter=meter,
        loads=loads,
    )


def resolve_port(flag_port: int | None, config_port: int | None = None) -> int:
    """Explicit flag beats the environment; environment beats the config."""
    if flag_port is not None:
        return flag_port
    env = os.environ.get(PORT_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{PORT_ENV_VAR}={env!r} is not an integer") from None
    if config_port is not None:
        return config_port
    return DEFAULT_PORT


class GatewaySession:
    """One meter + one station + persistence, driven by one writer thread."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        os.makedirs(config.data_dir, exist_ok=True)
        self.cards = CardStore.load(os.path.join(config.data_dir, "cards.jsonl"))
        self.sms_store = SmsOutboxStore(os.path.join(config.data_dir, "sms.jsonl"))
        self.events = EventLog.load(os.path.join(config.data_dir, "events.jsonl"))

        meter_config = config.resolved_meter()
        self.meter = Meter(meter_config)
        self.peripherals = PeripheralSet()
        self.sms_store.load_into(self.peripherals.modem)
        self._persisted_sms = len(self.peripherals.modem.outbox)
        self.mapper = TickEventMapper(self.peripherals)
        self.mapper._last_state = self.meter.state.value

        self.loads = {load.name: load for load in config.loads}
        self.on_loads: set[str] = set()

        self.commands: "queue.Queue[tuple[Any, queue.Queue]]" = queue.Queue()
        self._subscribers: list["queue.Queue[dict | None]"] = []
        self._sub_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="gateway-writer", daemon=True)

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self.commands.put((lambda: None, queue.Queue()))  # wake a writer blocked in get()
        self._thread.join(timeout=5)
        with self._sub_lock:
            for sub in self._subscribers:
                sub.put(None)
            self._subscribers.clear()

    # -- writer thread -----------------------------------------------------

    def _run(self) -> None:
        tick = self.meter.config.tick_seconds
        wall_per_tick = tick / self.config.multiplier
        next_tick = time.monotonic() + wall_per_tick
        while not self._stop.is_set():
            if self.config.pace == PACE_AFAP:
                timeout = 0.0005
            else:
                timeout = max(0.0005, next_tick - time.monotonic())
            try:
                fn, reply = self.commands.get(timeout=timeout)
            except queue.Empty:
                pass
            else:
                try:
                    reply.put(("ok", fn()))
                except Exception as exc:  # handed back to the waiting handler
                    reply.put(("err", exc))
                # fall through: a steady command stream must not starve ticks
            now = time.monotonic()
            if self.config.pace == PACE_AFAP or now >= next_tick:
                self._do_tick()
                next_tick = now + wall_per_tick if self.config.pace == PACE_WALL else now

    def call(self, fn) -> Any:
        """Run fn on the writer thread and return its result."""
        reply: queue.Queue = queue.Queue()
        self.commands.put((fn, reply))
        status, value = reply.get()
        if status == "err":
            raise value
        return value

    # -- event plumbing (writer thread only) --------------------------------

    def _append_event(self, t: float, kind: str, payload: dict[str, Any]) -> None:
        obj = self.events.append(t, kind, payload)
        with self._sub_lock:
            for sub in self._subscribers:
                sub.put(obj)

    def _emit_records(self, records) -> None:
        for record in records:
            self._append_event(record.t, record.kind, record.payload)
        # Persist messages the modem sent during these records.
        outbox = self.peripherals.modem.outbox
        while self._persisted_sms < len(outbox):
            self.sms_store.append(outbox[self._persisted_sms])
            self._persisted_sms += 1

    def _do_tick(self) -> None:
        watts = sum(self.loads[name].measured_watts for name in self.on_loads)
        vout = sense_vout(watts, self.meter.calibration, self.meter.config.mains_voltage)
        snapshot, effects = self.meter.tick(vout)
        self._emit_records(self.mapper.on_tick(snapshot, effects, snapshot.elapsed))

    # -- commands (run on writer thread via call()) --------------------------

    def cmd_meter_snapshot(self) -> dict[str, Any]:
        snap = self.meter.snapshot()
        return {
            "state": snap.state.value,
            "power_w": snap.displayed_power,
            "credit_sen": snap.credit.sen,
            "credit_rm": snap.credit.rm_2dp(),
            "relay": snap.relay_closed,
            "buzzer": snap.buzzer_active,
            "t": snap.elapsed,
            "lcd": [self.peripherals.lcd.line1, self.peripherals.lcd.line2],
        }

    def cmd_list_loads(self) -> list[dict[str, Any]]:
        return [
            {
                "name": load.name,
                "rated_watts": load.rated_watts,
                "measured_watts": load.measured_watts,
                "on": load.name in self.on_loads,
            }
            for load in self.loads.values()
        ]

    def cmd_set_load(self, name: str, on: bool) -> list[dict[str, Any]]:
        if name not in self.loads:
            raise ApiError(404, "unknown_load", f"no load named {name!r}")
        candidate = set(self.on_loads)
        (candidate.add if on else candidate.discard)(name)
        watts = sum(self.loads[n].measured_watts for n in candidate)
        mains = self.meter.config.mains_voltage
        max_watts = self.meter.calibration.max_current * mains
        if watts > max_watts:
            raise ApiError(
                422,
                "load_too_large",
                f"total load {watts:g} W exceeds the calibrated maximum {max_watts:g} W",
            )
        self.on_loads = candidate
        self._append_event(
            self.meter.elapsed, "load", {"name": name, "on": on, "total_watts": watts}
        )
        return self.cmd_list_loads()

    def cmd_mint_card(self) -> dict[str, Any]:
        card = self.cards.mint()
        self._append_event(self.meter.elapsed, "card", {"action": "mint", "uid": card.uid_hex})
        return _card_json(card)

    def cmd_list_cards(self) -> list[dict[str, Any]]:
        return [_card_json(card) for card in self.cards.cards.values()]

    def cmd_topup(self, uid_hex: str, amount_sen: int) -> dict[str, Any]:
        # Top-up sets the card balance (not adds); clients compose read+write
        # when they want increments.
        if amount_sen < 0:
            raise ApiError(422, "value_range", "amount_sen must be >= 0")
        if amount_sen > CAP_SEN:
            raise ApiError(
                422, "value_range", f"balance {amount_sen} sen would exceed the cap {CAP_SEN} sen"
            )
        card = self._get_card(uid_hex)
        station = StationState(SerialChannel())
        station.dock_card(card)
        station.station_write_credit(Money.from_sen(amount_sen))
        written = station.undock_card()
        self.cards.put(written)
        self._append_event(
            self.meter.elapsed,
            "card",
            {
                "action": "topup",
                "uid": written.uid_hex,
                "amount_sen": amount_sen,
                "credit_sen": written.credit.sen,
            },
        )
        return _card_json(written)

    def cmd_insert_card(self, uid_hex: str) -> dict[str, Any]:
        card = self._get_card(uid_hex)
        try:
            zeroed, effects = self.meter.insert_card(card)
        except WrongState as exc:
            raise ApiError(409, "wrong_state", str(exc)) from exc
        except InvalidCard as exc:
            raise ApiError(422, "invalid_card", str(exc)) from exc
        self.cards.put(zeroed)
        self._append_event(
            self.meter.elapsed,
            "card",
            {
                "action": "insert",
                "uid": zeroed.uid_hex,
                "transferred_sen": card.credit.sen,
            },
        )
        self._emit_records(self.mapper.on_insert(self.meter.snapshot(), effects, self.meter.elapsed))
        return self.cmd_meter_snapshot()

    def cmd_list_sms(self) -> list[dict[str, Any]]:
        return [
            {
                "msisdn": message.msisdn,
                "body": message.body,
                "sent_at": message.sent_at,
                "sequence": message.sequence,
            }
            for message in self.peripherals.modem.outbox
        ]

    def cmd_events_since(self, since: int) -> list[dict[str, Any]]:
        return self.events.since(since)

    def _get_card(self, uid_hex: str):
        try:
            return self.cards.get(uid_hex)
        except UnknownCard as exc:
            raise ApiError(404, "unknown_card", str(exc)) from exc

    # -- SSE subscription (any thread) ---------------------------------------

    def subscribe(self) -> "queue.Queue[dict | None]":
        sub: "queue.Queue[dict | None]" = queue.Queue()
        with self._sub_lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: "queue.Queue[dict | None]") -> None:
        with self._sub_lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)


def _card_json(card) -> dict[str, Any]:
    return {"uid": card.uid_hex, "credit_sen": card.credit.sen, "write_count": card.write_count}


class CardRef(BaseModel):
    card_uid: str


class LoadSwitch(BaseModel):
    on: bool


class TopupRequest(BaseModel):
    card_uid: str
    amount_sen: int


def create_app(config: GatewayConfig | None = None) -> FastAPI:
    """Build the FastAPI app; the writer thread runs for the app's lifespan."""
    session = GatewaySession(config or GatewayConfig())

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        session.start()
        try:
            yield
        finally:
            session.stop()

    app = FastAPI(title="prepaid meter gateway", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.session = session
    # The web console is served as a static page from another origin.
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(ApiError)
    def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    def _validation_error(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"code": "bad_request", "message": str(exc)})

    @app.get("/meter")
    def get_meter() -> dict:
        return session.call(session.cmd_meter_snapshot)

    @app.post("/meter/card")
    def post_meter_card(body: CardRef) -> dict:
        return session.call(lambda: session.cmd_insert_card(body.card_uid))

    @app.post("/meter/loads/{name}")
    def post_load(name: str, body: LoadSwitch) -> list:
        return session.call(lambda: session.cmd_set_load(name, body.on))

    @app.get("/loads")
    def get_loads() -> list:
        return session.call(session.cmd_list_loads)

    @app.post("/topup")
    def post_topup(body: TopupRequest) -> dict:
        return session.call(lambda: session.cmd_topup(body.card_uid, body.amount_sen))

    @app.get("/cards")
    def get_cards() -> list:
        return session.call(session.cmd_list_cards)

    @app.post("/cards")
    def post_cards() -> dict:
        return session.call(session.cmd_mint_card)

    @app.get("/sms")
    def get_sms() -> list:
        return session.call(session.cmd_list_sms)

    @app.get("/events")
    def get_events(since: int = 0) -> dict:
        return {"events": session.call(lambda: session.cmd_events_since(since))}

    @app.get("/events/stream")
    def get_event_stream(request: Request, since: int | None = None) -> StreamingResponse:
        if since is None:
            header = request.headers.get("last-event-id")
            since = int(header) if header and header.isdigit() else 0

        def stream() -> Iterator[str]:
            sub = session.subscribe()
            try:
                backlog = session.call(lambda: session.cmd_events_since(since))
                fence = since
                for obj in backlog:
                    fence = obj["seq"]
                    yield _sse(obj)
                while True:
                    try:
                        obj = sub.get(timeout=15.0)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    if obj is None:  # session shutting down
                        return
                    if obj["seq"] <= fence:
                        continue
                    yield _sse(obj)
            finally:
                session.unsubscribe(sub)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def _sse(obj: dict[str, Any]) -> str:
    return f"id: {obj['seq']}\ndata: {json.dumps(obj)}\n\n"
