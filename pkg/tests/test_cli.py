"""CLI behaviour: exit codes, file outputs, balance writes, reports."""

import json
import subprocess
import sys

import pytest

from rfidmeter.card import RfidCard
from rfidmeter.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, main
from rfidmeter.money import Money
from rfidmeter.store import CardStore

UID = bytes.fromhex("deadbeef00112233")


# -- run ----------------------------------------------------------------------


def test_run_builtin_writes_csv_and_jsonl(tmp_path, capsys):
    out = tmp_path / "t1.csv"
    assert main(["run", "--scenario", "table1-bulb1", "--out", str(out)]) == EXIT_OK
    assert "wrote" in capsys.readouterr().out

    rows = out.read_text().splitlines()
    assert rows[0] == "t,state,power_w,credit_rm,relay,buzzer"
    by_t = {line.split(",")[0]: line.split(",") for line in rows[1:]}
    assert by_t["30"][2] == "57"
    assert by_t["35"][2] == "0"  # past cutoff the trace keeps logging zeros

    jsonl = tmp_path / "t1.jsonl"
    records = [json.loads(line) for line in jsonl.read_text().splitlines()]
    assert all("kind" in r and "t" in r for r in records)
    assert any(r["kind"] == "sms" for r in records)


def test_run_unknown_scenario_exits_1(tmp_path, capsys):
    rc = main(["run", "--scenario", "nope", "--out", str(tmp_path / "x.csv")])
    assert rc == EXIT_VALIDATION
    assert "file not found" in capsys.readouterr().err


def test_run_invalid_scenario_file_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("initial_credit_rm: 5\nbogus_field: 1\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_VALIDATION
    assert "bogus_field" in capsys.readouterr().err


def test_run_malformed_yaml_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("loads: [unclosed\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_VALIDATION
    assert "error:" in capsys.readouterr().err


def test_run_overload_exits_2(tmp_path, capsys):
    doc = tmp_path / "over.yaml"
    doc.write_text(
        "initial_credit_rm: 5\n"
        "duration_seconds: 5\n"
        "loads:\n"
        "  - {name: a, measured_watts: 57}\n"
        "  - {name: b, measured_watts: 24}\n"
        "schedule:\n"
        "  - {t: 0, load: a, on: true}\n"
        "  - {t: 0, load: b, on: true}\n"
    )
    assert main(["run", "--scenario", str(doc), "--out", str(tmp_path / "x.csv")]) == EXIT_RUNTIME
    err = capsys.readouterr().err
    assert "loads on" in err and "'a'" in err


def test_run_with_fit_flag(tmp_path, capsys):
    rc = main(["run", "--scenario", "table1-bulb2", "--out", str(tmp_path / "t2.csv"), "--fit-table1"])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "base_rm_per_second" in out and "residuals_seconds" in out


# -- topup ---------------------------------------------------------------------


@pytest.fixture
def store_with_card(tmp_path):
    path = str(tmp_path / "cards.jsonl")
    store = CardStore.load(path)
    store.put(RfidCard.make(UID, Money.from_rm(5)))
    return path


def test_topup_writes_new_balance(store_with_card, capsys):
    rc = main(["topup", "--store", store_with_card, "--card", UID.hex(), "--amount", "7.25"])
    assert rc == EXIT_OK
    assert "7.25" in capsys.readouterr().out
    card = CardStore.load(store_with_card).get(UID.hex())
    # The amount is the balance written, not an increment on the RM5.
    assert card.credit == Money.from_rm("7.25")
    assert card.write_count == 1


def test_topup_unknown_card_exits_1(store_with_card, capsys):
    rc = main(["topup", "--store", store_with_card, "--card", "00" * 8, "--amount", "1"])
    assert rc == EXIT_VALIDATION
    assert "no card" in capsys.readouterr().err


@pytest.mark.parametrize("amount", ["5.005", "abc", "-1", "10000.01"])
def test_topup_rejects_bad_amounts(store_with_card, capsys, amount):
    rc = main(["topup", "--store", store_with_card, "--card", UID.hex(), "--amount", amount])
    assert rc == EXIT_VALIDATION
    assert "error:" in capsys.readouterr().err
    assert CardStore.load(store_with_card).get(UID.hex()).credit == Money.from_rm(5)


# -- fit-table1 ------------------------------------------------------------------


def test_fit_table1_prints_coefficients(capsys):
    assert main(["fit-table1"]) == EXIT_OK
    out = capsys.readouterr().out
    base = float(out.split("base_rm_per_second: ")[1].splitlines()[0])
    rate = float(out.split("rate_rm_per_watt_second: ")[1].splitlines()[0])
    assert base == pytest.approx(0.09007, abs=5e-6)
    assert rate == pytest.approx(0.0011216, abs=5e-8)
    assert "residuals_seconds" in out


# -- report ----------------------------------------------------------------------


def test_report_defaults_to_all_builtin_runs(tmp_path, capsys):
    out_dir = tmp_path / "rep"
    assert main(["report", "--out-dir", str(out_dir)]) == EXIT_OK
    names = {p.name for p in out_dir.iterdir()}
    assert names == {
        "table1-bulb1.csv",
        "table1-bulb2.csv",
        "table1-bulb3.csv",
        "table1-bulb1.png",
        "table1-bulb2.png",
        "table1-bulb3.png",
        "comparison.png",
    }
    assert capsys.readouterr().out.count("wrote") == 4
    # PNG magic bytes: the figures really rendered.
    assert (out_dir / "comparison.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_report_single_scenario_skips_comparison(tmp_path):
    out_dir = tmp_path / "rep"
    assert main(["report", "--scenario", "table1-bulb2", "--out-dir", str(out_dir)]) == EXIT_OK
    names = {p.name for p in out_dir.iterdir()}
    assert names == {"table1-bulb2.csv", "table1-bulb2.png"}


def test_report_unknown_scenario_exits_1(tmp_path, capsys):
    rc = main(["report", "--scenario", "ghost", "--out-dir", str(tmp_path / "rep")])
    assert rc == EXIT_VALIDATION
    assert "file not found" in capsys.readouterr().err


# -- entry point wiring -----------------------------------------------------------


def test_module_entrypoint():
    proc = subprocess.run(
        [sys.executable, "-m", "rfidmeter.cli", "fit-table1"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == EXIT_OK
    assert "rate_rm_per_watt_second" in proc.stdout
