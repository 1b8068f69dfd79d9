"""Top-up station: a duplex byte channel between a host and a docked card.

The station talks the card frame protocol directly (no meter controller is
involved on the top-up path). Every operation is one or more
request/reply exchanges, each observable on the channel trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import card as cardmod
from .card import (
    CommandCode,
    Frame,
    FrameError,
    NAK_BAD_CHECKSUM,
    NAK_BAD_REQUEST,
    NAK_VALUE_RANGE,
    RfidCard,
)
from .money import MICRO_PER_SEN, CAP_MICRO, Money

_NAK_REASONS = {
    NAK_BAD_CHECKSUM: "bad checksum",
    NAK_BAD_REQUEST: "bad request",
    NAK_VALUE_RANGE: "value out of range",
}


class StationError(Exception):
    pass


class AlreadyDocked(StationError):
    pass


class NoCard(StationError):
    pass


class ValueOutOfRange(StationError):
    pass


class VerifyMismatch(StationError):
    def __init__(self, written: Money, readback: Money):
        super().__init__(f"wrote {written}, card reads back {readback}")
        self.written = written
        self.readback = readback


class ProtocolError(StationError):
    """Decode failure or NAK surfaced from the card exchange."""

    def __init__(self, message: str, cause: Exception | None = None):
        super().__init__(message)
        self.cause = cause


class FaultMode(Enum):
    NONE = "none"
    CORRUPT_NEXT_BYTE = "corrupt_next_byte"
    DROP_NEXT_FRAME = "drop_next_frame"


@dataclass
class TraceEntry:
    tick: int
    direction: str  # "host->card" or "card->host"
    data: bytes

    def hexdump(self) -> str:
        return f"{self.tick:06d} {self.direction:10s} {self.data.hex(' ')}"


@dataclass
class SerialChannel:
    """Lossless FIFO byte channel with two injectable fault modes.

    Faults arm once and clear after firing. corrupt_next_byte XORs 0x01
    into byte index 1 (the command byte) of the next frame in transit so
    the defect surfaces as a checksum failure; drop_next_frame discards
    the next frame entirely.
    """

    fault_mode: FaultMode = FaultMode.NONE
    a_to_b: bytearray = field(default_factory=bytearray)
    b_to_a: bytearray = field(default_factory=bytearray)
    trace: list[TraceEntry] = field(default_factory=list)
    _tick: int = 0

    def _transfer(self, frame_bytes: bytes, direction: str) -> bytes | None:
        if self.fault_mode == FaultMode.DROP_NEXT_FRAME:
            self.fault_mode = FaultMode.NONE
            return None
        if self.fault_mode == FaultMode.CORRUPT_NEXT_BYTE:
            self.fault_mode = FaultMode.NONE
            corrupted = bytearray(frame_bytes)
            corrupted[min(1, len(corrupted) - 1)] ^= 0x01
            frame_bytes = bytes(corrupted)
        self._tick += 1
        self.trace.append(TraceEntry(self._tick, direction, frame_bytes))
        return frame_bytes

    def send_to_card(self, frame_bytes: bytes) -> bytes | None:
        delivered = self._transfer(frame_bytes, "host->card")
        if delivered is not None:
            self.a_to_b.extend(delivered)
        return delivered

    def send_to_host(self, frame_bytes: bytes) -> bytes | None:
        delivered = self._transfer(frame_bytes, "card->host")
        if delivered is not None:
            self.b_to_a.extend(delivered)
        return delivered

    def drain_card_side(self) -> bytes:
        data = bytes(self.a_to_b)
        self.a_to_b.clear()
        return data

    def drain_host_side(self) -> bytes:
        data = bytes(self.b_to_a)
        self.b_to_a.clear()
        return data

    def trace_hexdump(self) -> str:
        return "\n".join(entry.hexdump() for entry in self.trace)


class StationState:
    """Host-side station with an optional docked card.

    Single-threaded by contract; operations on one instance must be
    externally serialized.
    """

    def __init__(self, channel: SerialChannel | None = None):
        self.channel = channel if channel is not None else SerialChannel()
        self.docked: RfidCard | None = None

    def dock_card(self, card: RfidCard) -> None:
        if self.docked is not None:
            raise AlreadyDocked(f"card {self.docked.uid_hex} is already docked")
        self.docked = card

    def undock_card(self) -> RfidCard:
        if self.docked is None:
            raise NoCard("no card docked")
        card, self.docked = self.docked, None
        return card

    def _card_respond(self) -> None:
        # Docked-card side: decode one request, execute it, reply.
        raw = self.channel.drain_card_side()
        if not raw:
            return
        try:
            request = cardmod.decode_frame(raw)
        except FrameError:
            reply = Frame(CommandCode.NAK, bytes([NAK_BAD_CHECKSUM]))
        else:
            assert self.docked is not None
            self.docked, reply = cardmod.apply_command(self.docked, request)
        self.channel.send_to_host(cardmod.encode_frame(reply.cmd, reply.payload))

    def _transact(self, cmd: CommandCode, payload: bytes = b"") -> Frame:
        """One request frame out, exactly one reply frame consumed."""
        if self.docked is None:
            raise NoCard("no card docked")
        self.channel.send_to_card(cardmod.encode_frame(cmd, payload))
        self._card_respond()
        raw = self.channel.drain_host_side()
        if not raw:
            raise ProtocolError("no reply from card (frame dropped)")
        try:
            reply = cardmod.decode_frame(raw)
        except FrameError as exc:
            raise ProtocolError(f"reply undecodable: {exc}", cause=exc) from exc
        if reply.cmd == CommandCode.NAK:
            code = reply.payload[0] if reply.payload else 0
            reason = _NAK_REASONS.get(code, "unknown reason")
            raise ProtocolError(f"card NAK 0x{code:02X} ({reason}) for {cmd.name}")
        if reply.cmd != CommandCode.ACK or not reply.payload or reply.payload[0] != cmd:
            raise ProtocolError(f"unexpected reply {reply.cmd.name} to {cmd.name}")
        return reply

    def station_read(self) -> tuple[bytes, Money]:
        """Read (uid, credit) off the docked card; pure query."""
        uid_reply = self._transact(CommandCode.READ_UID)
        if len(uid_reply.payload) != 1 + cardmod.UID_LEN:
            raise ProtocolError(f"bad READ_UID reply length {len(uid_reply.payload)}")
        credit_reply = self._transact(CommandCode.READ_CREDIT)
        if len(credit_reply.payload) != 5:
            raise ProtocolError(f"bad READ_CREDIT reply length {len(credit_reply.payload)}")
        sen = int.from_bytes(credit_reply.payload[1:], "big")
        return uid_reply.payload[1:], Money.from_sen(sen)

    def station_write_credit(self, amount: Money) -> None:
        """Set the docked card's balance to `amount` and verify by readback.

        "Top up to" semantics: the new balance replaces the old one.
        """
        if self.docked is None:
            raise NoCard("no card docked")
        if amount.micro_rm % MICRO_PER_SEN != 0:
            raise ValueOutOfRange(f"amount must be whole sen, got {amount.rm_6dp()} RM")
        if amount.micro_rm > CAP_MICRO:
            raise ValueOutOfRange(f"amount {amount} above cap")
        self._transact(CommandCode.WRITE_CREDIT, amount.sen.to_bytes(4, "big"))
        verify = self._transact(CommandCode.READ_CREDIT)
        readback = Money.from_sen(int.from_bytes(verify.payload[1:], "big"))
        if readback != amount:
            raise VerifyMismatch(amount, readback)
