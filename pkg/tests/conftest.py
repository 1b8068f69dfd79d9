"""Shared fixtures: gateway apps in both pacing modes and a real HTTP server.

The in-process test client buffers whole responses, which would hang on an
endless event stream, so SSE tests talk to uvicorn over a real socket.
"""

from __future__ import annotations

import threading
import time

import pytest
import uvicorn

from rfidmeter.meter import MeterConfig
from rfidmeter.service import GatewayConfig, create_app
from rfidmeter.sim import fitted_table1_tariff


# test function name -> criterion label, filled by the @criterion decorator
ACCEPTANCE_CRITERIA: dict[str, str] = {}


def pytest_report_teststatus(report, config):
    """Replace the verdict word for acceptance tests, one line per criterion."""
    label = ACCEPTANCE_CRITERIA.get(report.nodeid.rsplit("::", 1)[-1])
    if label is None or report.when != "call":
        return None
    if report.passed:
        return "passed", ".", f"ACCEPTANCE PASS: {label}"
    if report.failed:
        return "failed", "F", f"ACCEPTANCE FAIL: {label}"
    return None


def frozen_config(data_dir: str) -> GatewayConfig:
    """Wall pacing with hour-long ticks: no tick fires during a test."""
    return GatewayConfig(
        pace="wall",
        data_dir=data_dir,
        meter=MeterConfig(tariff=fitted_table1_tariff(), tick_seconds=3600.0),
    )


def afap_config(data_dir: str) -> GatewayConfig:
    return GatewayConfig(pace="afap", data_dir=data_dir)


@pytest.fixture
def frozen_app(tmp_path):
    return create_app(frozen_config(str(tmp_path / "data")))


@pytest.fixture
def afap_app(tmp_path):
    return create_app(afap_config(str(tmp_path / "data")))


class LiveServer:
    """uvicorn on an ephemeral port, running on a daemon thread."""

    def __init__(self, app):
        self._config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def __enter__(self) -> str:
        self._thread.start()
        deadline = time.monotonic() + 10
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start within 10s")
            time.sleep(0.01)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def __exit__(self, *exc) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)
