"""Read/write RFID card model and the byte-exact frame protocol.

Frame layout (total length = len + 5):

    0xAA | cmd | len | payload[len] | chk | 0x55

with chk = XOR(cmd, len, payload bytes) and len in 0..32. Credit crosses
the wire as whole sen in 4 big-endian bytes; the card itself stores
micro-RM (see money.py).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

from .money import CAP_SEN, Money

SOF = 0xAA
EOF = 0x55
MAX_PAYLOAD = 32
UID_LEN = 8

# NAK reason codes carried in the reply payload.
NAK_BAD_CHECKSUM = 0x01
NAK_BAD_REQUEST = 0x02
NAK_VALUE_RANGE = 0x03


class CommandCode(IntEnum):
    READ_UID = 0x01
    READ_CREDIT = 0x02
    WRITE_CREDIT = 0x03
    ACK = 0x04
    NAK = 0x05


class FrameError(Exception):
    """Base class for frame encode/decode failures."""


class PayloadTooLong(FrameError):
    pass


class BadSof(FrameError):
    pass


class BadEof(FrameError):
    pass


class BadChecksum(FrameError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"checksum mismatch: expected 0x{expected:02X}, got 0x{actual:02X}")
        self.expected = expected
        self.actual = actual


class UnknownCommand(FrameError):
    def __init__(self, cmd: int):
        super().__init__(f"unknown command byte 0x{cmd:02X}")
        self.cmd = cmd


class TruncatedFrame(FrameError):
    pass


class BadLength(FrameError):
    """Length field above 32, or buffer longer than the declared frame."""


@dataclass(frozen=True)
class Frame:
    cmd: CommandCode
    payload: bytes

    def __post_init__(self) -> None:
        if len(self.payload) > MAX_PAYLOAD:
            raise PayloadTooLong(f"payload is {len(self.payload)} bytes, max {MAX_PAYLOAD}")


def frame_checksum(cmd: int, payload: bytes) -> int:
    chk = cmd ^ len(payload)
    for b in payload:
        chk ^= b
    return chk


def encode_frame(cmd: CommandCode, payload: bytes = b"") -> bytes:
    """Encode one frame; PayloadTooLong above 32 bytes."""
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLong(f"payload is {len(payload)} bytes, max {MAX_PAYLOAD}")
    return bytes([SOF, cmd, len(payload)]) + payload + bytes([frame_checksum(cmd, payload), EOF])


def decode_frame(raw: bytes) -> Frame:
    """Decode one complete frame; exact inverse of encode_frame on valid input."""
    if len(raw) < 5:
        raise TruncatedFrame(f"frame is {len(raw)} bytes, minimum is 5")
    if raw[0] != SOF:
        raise BadSof(f"expected SOF 0x{SOF:02X}, got 0x{raw[0]:02X}")
    length = raw[2]
    if length > MAX_PAYLOAD:
        raise BadLength(f"length field {length} exceeds max payload {MAX_PAYLOAD}")
    total = length + 5
    if len(raw) < total:
        raise TruncatedFrame(f"need {total} bytes for declared payload, got {len(raw)}")
    if len(raw) > total:
        raise BadLength(f"{len(raw) - total} trailing bytes after {total}-byte frame")
    if raw[total - 1] != EOF:
        raise BadEof(f"expected EOF 0x{EOF:02X}, got 0x{raw[total - 1]:02X}")
    payload = raw[3 : 3 + length]
    expected = frame_checksum(raw[1], payload)
    if raw[total - 2] != expected:
        raise BadChecksum(expected, raw[total - 2])
    try:
        cmd = CommandCode(raw[1])
    except ValueError:
        raise UnknownCommand(raw[1]) from None
    return Frame(cmd, bytes(payload))


@dataclass(frozen=True)
class RfidCard:
    """Persistent card state; checksum covers uid, credit and write counter."""

    uid: bytes
    credit: Money
    write_count: int
    checksum: int

    def __post_init__(self) -> None:
        if len(self.uid) != UID_LEN:
            raise ValueError(f"uid must be {UID_LEN} bytes, got {len(self.uid)}")
        if self.write_count < 0:
            raise ValueError(f"write_count cannot be negative: {self.write_count}")

    @classmethod
    def make(cls, uid: bytes, credit: Money = Money.zero(), write_count: int = 0) -> "RfidCard":
        card = cls(uid, credit, write_count, 0)
        return replace(card, checksum=card_checksum(card))

    @property
    def is_valid(self) -> bool:
        return self.checksum == card_checksum(self)

    @property
    def uid_hex(self) -> str:
        return self.uid.hex()


def card_checksum(card: RfidCard) -> int:
    """XOR of uid bytes, 8 big-endian credit bytes and write_count mod 256."""
    chk = 0
    for b in card.uid:
        chk ^= b
    for b in card.credit.micro_rm.to_bytes(8, "big"):
        chk ^= b
    return chk ^ (card.write_count % 256)


def card_with_credit(card: RfidCard, credit: Money) -> RfidCard:
    """One successful credit write: new balance, write_count+1, fresh checksum."""
    written = replace(card, credit=credit, write_count=card.write_count + 1)
    return replace(written, checksum=card_checksum(written))


def _ack(tag: int, data: bytes = b"") -> Frame:
    return Frame(CommandCode.ACK, bytes([tag]) + data)


def _nak(code: int) -> Frame:
    return Frame(CommandCode.NAK, bytes([code]))


def apply_command(card: RfidCard, frame: Frame) -> tuple[RfidCard, Frame]:
    """Execute one request frame against a card.

    Replies echo the request command code as the first ACK payload byte.
    The card is returned unchanged on every error path.
    """
    if frame.cmd == CommandCode.READ_UID:
        if frame.payload:
            return card, _nak(NAK_BAD_REQUEST)
        return card, _ack(CommandCode.READ_UID, card.uid)

    if frame.cmd == CommandCode.READ_CREDIT:
        if frame.payload:
            return card, _nak(NAK_BAD_REQUEST)
        return card, _ack(CommandCode.READ_CREDIT, card.credit.sen.to_bytes(4, "big"))

    if frame.cmd == CommandCode.WRITE_CREDIT:
        if len(frame.payload) != 4:
            return card, _nak(NAK_BAD_REQUEST)
        sen = int.from_bytes(frame.payload, "big")
        if sen > CAP_SEN:
            return card, _nak(NAK_VALUE_RANGE)
        written = card_with_credit(card, Money.from_sen(sen))
        return written, _ack(CommandCode.WRITE_CREDIT, sen.to_bytes(4, "big"))

    # ACK/NAK arriving as a request
    return card, _nak(NAK_BAD_REQUEST)
