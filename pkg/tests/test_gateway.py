"""HTTP gateway: REST endpoints, error shapes, pacing, persistence, SSE."""

import json
import pathlib
import time

import httpx
import pytest
from fastapi.testclient import TestClient

from conftest import LiveServer, afap_config, frozen_config
from rfidmeter.money import CAP_SEN
from rfidmeter.service import create_app

SNAPSHOT_KEYS = {"state", "power_w", "credit_sen", "credit_rm", "relay", "buzzer", "t", "lcd"}


def _mint_and_load(client, amount_sen):
    uid = client.post("/cards").json()["uid"]
    client.post("/topup", json={"card_uid": uid, "amount_sen": amount_sen}).raise_for_status()
    return uid


# -- snapshots and the happy path -------------------------------------------


def test_initial_snapshot(frozen_app):
    with TestClient(frozen_app) as client:
        snap = client.get("/meter").json()
        assert set(snap) == SNAPSHOT_KEYS
        assert snap["state"] == "AwaitingCard"
        assert snap["power_w"] == 0
        assert snap["credit_sen"] == 0
        assert snap["relay"] is False
        assert snap["buzzer"] is False
        assert [len(line) for line in snap["lcd"]] == [16, 16]


def test_mint_topup_insert_flow(frozen_app):
    with TestClient(frozen_app) as client:
        minted = client.post("/cards").json()
        assert set(minted) == {"uid", "credit_sen", "write_count"}
        assert len(minted["uid"]) == 16 and minted["credit_sen"] == 0

        after_topup = client.post(
            "/topup", json={"card_uid": minted["uid"], "amount_sen": 500}
        ).json()
        assert after_topup["credit_sen"] == 500
        assert after_topup["write_count"] == 1

        snap = client.post("/meter/card", json={"card_uid": minted["uid"]}).json()
        assert snap["state"] == "Active"
        assert snap["credit_rm"] == "5.00"
        assert snap["relay"] is True
        assert snap["lcd"] == ["PWR:    0W      ", "CR: RM005.00    "]

        # Custody moved to the meter: the stored card is zeroed.
        (card,) = client.get("/cards").json()
        assert card["credit_sen"] == 0
        assert card["write_count"] == 2


def test_topup_sets_balance_not_adds(frozen_app):
    with TestClient(frozen_app) as client:
        uid = _mint_and_load(client, 500)
        card = client.post("/topup", json={"card_uid": uid, "amount_sen": 300}).json()
        assert card["credit_sen"] == 300


def test_loads_listing_and_switching(frozen_app):
    with TestClient(frozen_app) as client:
        loads = client.get("/loads").json()
        assert {l["name"] for l in loads} == {"bulb60", "bulb15", "bulb25"}
        assert all(l["on"] is False for l in loads)

        loads = client.post("/meter/loads/bulb15", json={"on": True}).json()
        assert {l["name"]: l["on"] for l in loads}["bulb15"] is True


# -- error shapes ------------------------------------------------------------


def test_unknown_card_404(frozen_app):
    with TestClient(frozen_app) as client:
        resp = client.post("/topup", json={"card_uid": "00" * 8, "amount_sen": 100})
        assert resp.status_code == 404
        body = resp.json()
        assert set(body) == {"code", "message"}
        assert body["code"] == "unknown_card"

        resp = client.post("/meter/card", json={"card_uid": "ff" * 8})
        assert resp.status_code == 404
        assert resp.json()["code"] == "unknown_card"


@pytest.mark.parametrize("amount", [-1, CAP_SEN + 1])
def test_topup_value_range_422(frozen_app, amount):
    with TestClient(frozen_app) as client:
        uid = _mint_and_load(client, 100)
        resp = client.post("/topup", json={"card_uid": uid, "amount_sen": amount})
        assert resp.status_code == 422
        assert resp.json()["code"] == "value_range"
        # Balance untouched by the rejected write.
        assert client.get("/cards").json()[0]["credit_sen"] == 100


def test_insert_wrong_state_409(frozen_app):
    with TestClient(frozen_app) as client:
        uid = _mint_and_load(client, 500)
        client.post("/meter/card", json={"card_uid": uid}).raise_for_status()
        second = _mint_and_load(client, 200)
        resp = client.post("/meter/card", json={"card_uid": second})
        assert resp.status_code == 409
        assert resp.json()["code"] == "wrong_state"


def test_unknown_load_404(frozen_app):
    with TestClient(frozen_app) as client:
        resp = client.post("/meter/loads/toaster", json={"on": True})
        assert resp.status_code == 404
        assert resp.json()["code"] == "unknown_load"


def test_load_too_large_422(frozen_app):
    with TestClient(frozen_app) as client:
        client.post("/meter/loads/bulb60", json={"on": True}).raise_for_status()
        resp = client.post("/meter/loads/bulb25", json={"on": True})
        assert resp.status_code == 422
        assert resp.json()["code"] == "load_too_large"
        loads = {l["name"]: l["on"] for l in client.get("/loads").json()}
        assert loads == {"bulb60": True, "bulb15": False, "bulb25": False}


def test_malformed_body_422_bad_request(frozen_app):
    with TestClient(frozen_app) as client:
        resp = client.post("/topup", json={"card_uid": "00" * 8})  # missing amount_sen
        assert resp.status_code == 422
        assert resp.json()["code"] == "bad_request"
        resp = client.post("/meter/loads/bulb60", json={})
        assert resp.status_code == 422
        assert resp.json()["code"] == "bad_request"


# -- event log over HTTP ------------------------------------------------------


def test_mutations_append_events_reads_do_not(frozen_app):
    with TestClient(frozen_app) as client:
        def count():
            return len(client.get("/events").json()["events"])

        base = count()
        client.get("/meter")
        client.get("/loads")
        client.get("/cards")
        client.get("/sms")
        assert count() == base

        uid = client.post("/cards").json()["uid"]
        assert count() == base + 1  # mint
        client.post("/topup", json={"card_uid": uid, "amount_sen": 750})
        assert count() == base + 2  # topup
        client.post("/meter/loads/bulb15", json={"on": True})
        assert count() == base + 3  # load switch
        client.post("/meter/card", json={"card_uid": uid})
        # insert + state_change + relay + display
        assert count() == base + 7

        events = client.get("/events").json()["events"]
        assert {e["kind"] for e in events} == {"card", "load", "state_change", "relay", "display"}
        seqs = [e["seq"] for e in events]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)


def test_events_since_filter(frozen_app):
    with TestClient(frozen_app) as client:
        _mint_and_load(client, 100)
        events = client.get("/events", params={"since": 1}).json()["events"]
        assert events and all(e["seq"] > 1 for e in events)


# -- end to end at full speed -------------------------------------------------


def _drive_to_cutoff(client):
    uid = _mint_and_load(client, 500)
    client.post("/meter/card", json={"card_uid": uid}).raise_for_status()
    client.post("/meter/loads/bulb60", json={"on": True}).raise_for_status()
    deadline = time.monotonic() + 10
    while time.monotonic() < deadline:
        snap = client.get("/meter").json()
        if snap["state"] == "CutOff":
            return snap
        time.sleep(0.01)
    pytest.fail("meter did not cut off within 10 s of wall time")


def test_afap_run_to_cutoff(afap_app):
    with TestClient(afap_app) as client:
        snap = _drive_to_cutoff(client)
        assert snap["relay"] is False
        assert snap["credit_sen"] == 0
        assert snap["power_w"] == 0

        messages = client.get("/sms").json()
        assert len(messages) == 1
        assert messages[0]["msisdn"] == "+60123456789"
        assert "remaining" in messages[0]["body"]

        kinds = [e["kind"] for e in client.get("/events").json()["events"]]
        assert "sms" in kinds and "state_change" in kinds and "tick" in kinds


# -- persistence across restart ----------------------------------------------


def test_restart_preserves_stores_and_continues_seq(tmp_path):
    data_dir = tmp_path / "data"

    with TestClient(create_app(afap_config(str(data_dir)))) as client:
        _drive_to_cutoff(client)
        cards_before = client.get("/cards").json()
        sms_before = client.get("/sms").json()

    files = [data_dir / name for name in ("cards.jsonl", "sms.jsonl", "events.jsonl")]
    bytes_before = [f.read_bytes() for f in files]

    # Restart over the same directory: durable state intact, meter RAM reset.
    with TestClient(create_app(frozen_config(str(data_dir)))) as client:
        assert client.get("/meter").json()["state"] == "AwaitingCard"
        assert client.get("/cards").json() == cards_before
        assert client.get("/sms").json() == sms_before
        last_seq = client.get("/events").json()["events"][-1]["seq"]
    assert [f.read_bytes() for f in files] == bytes_before

    # A third boot appends after the highest persisted sequence number.
    with TestClient(create_app(frozen_config(str(data_dir)))) as client:
        client.post("/cards").raise_for_status()
        events = client.get("/events").json()["events"]
        assert events[-1]["seq"] == last_seq + 1
        assert events[-1]["kind"] == "card"


# -- event stream (real server: the in-process client buffers responses) ------


def _read_events(response, count, deadline_s=10.0):
    got = []
    current_id = None
    deadline = time.monotonic() + deadline_s
    for line in response.iter_lines():
        if line.startswith("id: "):
            current_id = int(line[len("id: "):])
        elif line.startswith("data: "):
            data = json.loads(line[len("data: "):])
            assert data["seq"] == current_id  # id field mirrors the payload seq
            got.append(data)
            if len(got) >= count:
                break
        if time.monotonic() > deadline:
            pytest.fail(f"expected {count} events, got {len(got)} before the deadline")
    return got


def test_stream_backlog_live_and_resume(tmp_path):
    app = create_app(frozen_config(str(tmp_path / "data")))
    with LiveServer(app) as base, httpx.Client(base_url=base, timeout=10.0) as client:
        uid = _mint_and_load(client, 500)

        backlog = client.get("/events").json()["events"]
        assert len(backlog) == 2

        with client.stream("GET", "/events/stream", params={"since": 0}) as resp:
            assert resp.headers["content-type"].startswith("text/event-stream")
            assert _read_events(resp, 2) == backlog

        # Live delivery: an event raised after connecting is streamed.
        with client.stream("GET", "/events/stream", params={"since": 0}) as resp:
            client.post("/meter/card", json={"card_uid": uid}).raise_for_status()
            seqs = [e["seq"] for e in _read_events(resp, 6)]
            assert seqs == [1, 2, 3, 4, 5, 6]

        # Resume from the middle: strictly-greater sequence numbers, no repeats.
        with client.stream("GET", "/events/stream", params={"since": 3}) as resp:
            assert [e["seq"] for e in _read_events(resp, 3)] == [4, 5, 6]

        # Resume via Last-Event-ID header, as an auto-reconnecting client sends.
        with client.stream(
            "GET", "/events/stream", headers={"Last-Event-ID": "5"}
        ) as resp:
            assert [e["seq"] for e in _read_events(resp, 1)] == [6]


def test_stream_deduplicates_across_subscribe_race(tmp_path):
    app = create_app(frozen_config(str(tmp_path / "data")))
    with LiveServer(app) as base, httpx.Client(base_url=base, timeout=10.0) as client:
        with client.stream("GET", "/events/stream", params={"since": 0}) as resp:
            for _ in range(5):
                client.post("/cards").raise_for_status()
            seqs = [e["seq"] for e in _read_events(resp, 5)]
            assert seqs == [1, 2, 3, 4, 5]
