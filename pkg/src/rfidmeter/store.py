"""File-backed JSONL stores for cards, the SMS outbox, and the event log.

Each store is a plain newline-delimited JSON file so state survives a
process restart and can be inspected with standard shell tools.
"""

from __future__ import annotations

import json
import os
import secrets
from dataclasses import dataclass, field
from typing import Any, Iterator

from .card import UID_LEN, RfidCard
from .money import Money
from .peripherals import GsmModem, SmsMessage


class StoreError(Exception):
    pass


class UnknownCard(StoreError):
    def __init__(self, uid_hex: str):
        super().__init__(f"no card with uid {uid_hex}")
        self.uid_hex = uid_hex


class CorruptStore(StoreError):
    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no


def _read_jsonl(path: str) -> Iterator[tuple[int, dict[str, Any]]]:
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptStore(path, line_no, f"bad JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorruptStore(path, line_no, "expected a JSON object")
            yield line_no, obj


@dataclass
class CardStore:
    """All issued cards, keyed by uid. Rewritten atomically on change."""

    path: str
    cards: dict[str, RfidCard] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str) -> "CardStore":
        store = cls(path)
        if not os.path.exists(path):
            return store
        for line_no, obj in _read_jsonl(path):
            try:
                uid = bytes.fromhex(obj["uid"])
                credit = Money.from_sen(int(obj["credit_sen"]))
                write_count = int(obj["write_count"])
            except (KeyError, ValueError, TypeError) as exc:
                raise CorruptStore(path, line_no, f"bad card record: {exc}") from exc
            if len(uid) != UID_LEN:
                raise CorruptStore(path, line_no, f"uid must be {UID_LEN} bytes")
            card = RfidCard.make(uid, credit, write_count)
            store.cards[card.uid_hex] = card
        return store

    def mint(self) -> RfidCard:
        """Issue a fresh zero-credit card with a random unused uid."""
        while True:
            uid = secrets.token_bytes(UID_LEN)
            if uid.hex() not in self.cards:
                break
        card = RfidCard.make(uid, Money.zero())
        self.put(card)
        return card

    def get(self, uid_hex: str) -> RfidCard:
        try:
            return self.cards[uid_hex.lower()]
        except KeyError:
            raise UnknownCard(uid_hex) from None

    def put(self, card: RfidCard) -> None:
        self.cards[card.uid_hex] = card
        self._rewrite()

    def _rewrite(self) -> None:
        tmp = self.path + ".tmp"
        with open(tmp, "w") as fh:
            for card in self.cards.values():
                fh.write(
                    json.dumps(
                        {
                            "uid": card.uid_hex,
                            "credit_sen": card.credit.sen,
                            "write_count": card.write_count,
                        }
                    )
                    + "\n"
                )
        os.replace(tmp, self.path)


@dataclass
class SmsOutboxStore:
    """Append-only log of sent messages, one JSON object per message."""

    path: str

    def load_into(self, modem: GsmModem) -> None:
        if not os.path.exists(self.path):
            return
        messages = []
        for line_no, obj in _read_jsonl(self.path):
            try:
                messages.append(
                    SmsMessage(
                        msisdn=str(obj["msisdn"]),
                        body=str(obj["body"]),
                        sent_at=float(obj["sent_at"]),
                        sequence=int(obj["sequence"]),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise CorruptStore(self.path, line_no, f"bad sms record: {exc}") from exc
        modem.restore(messages)

    def append(self, message: SmsMessage) -> None:
        with open(self.path, "a") as fh:
            fh.write(
                json.dumps(
                    {
                        "msisdn": message.msisdn,
                        "body": message.body,
                        "sent_at": message.sent_at,
                        "sequence": message.sequence,
                    }
                )
                + "\n"
            )


@dataclass
class EventLog:
    """Append-only numbered event log; `seq` keeps growing across restarts."""

    path: str
    events: list[dict[str, Any]] = field(default_factory=list)
    next_seq: int = 1

    @classmethod
    def load(cls, path: str) -> "EventLog":
        log = cls(path)
        if not os.path.exists(path):
            return log
        for line_no, obj in _read_jsonl(path):
            if "seq" not in obj:
                raise CorruptStore(path, line_no, "event record missing seq")
            log.events.append(obj)
            log.next_seq = max(log.next_seq, int(obj["seq"]) + 1)
        return log

    def append(self, t: float, kind: str, payload: dict[str, Any]) -> dict[str, Any]:
        obj = {"seq": self.next_seq, "t": t, "kind": kind, **payload}
        self.next_seq += 1
        self.events.append(obj)
        with open(self.path, "a") as fh:
            fh.write(json.dumps(obj) + "\n")
        return obj

    def since(self, seq: int) -> list[dict[str, Any]]:
        return [event for event in self.events if event["seq"] > seq]
