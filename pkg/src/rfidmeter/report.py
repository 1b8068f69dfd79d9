"""Render scenario traces to PNG figures (power and credit against time)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .sim import EventRecord


def _tick_series(trace: list[EventRecord]) -> tuple[list[float], list[int], list[float]]:
    ts, power, credit = [], [], []
    for record in trace:
        if record.kind != "tick":
            continue
        ts.append(record.t)
        power.append(record.payload["power_w"])
        credit.append(record.payload["credit_micro"] / 1_000_000)
    return ts, power, credit


def render_trace_png(trace: list[EventRecord], title: str, path: str) -> str:
    """Write a two-panel figure for one run; returns the path written."""
    ts, power, credit = _tick_series(trace)
    fig, (ax_power, ax_credit) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    ax_power.step(ts, power, where="post")
    ax_power.set_ylabel("power (W)")
    ax_power.set_title(title)
    ax_credit.step(ts, credit, where="post")
    ax_credit.set_ylabel("credit (RM)")
    ax_credit.set_xlabel("time (s)")
    for ax in (ax_power, ax_credit):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_comparison_png(traces: dict[str, list[EventRecord]], path: str) -> str:
    """Overlay the credit curves of several runs on one axis."""
    fig, ax = plt.subplots(figsize=(8, 5))
    for name, trace in traces.items():
        ts, _, credit = _tick_series(trace)
        ax.step(ts, credit, where="post", label=name)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("credit (RM)")
    ax.set_title("credit depletion by load")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report(traces: dict[str, list[EventRecord]], out_dir: str) -> list[str]:
    """One PNG per trace plus a combined comparison figure."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, trace in traces.items():
        written.append(render_trace_png(trace, name, os.path.join(out_dir, f"{name}.png")))
    if len(traces) > 1:
        written.append(render_comparison_png(traces, os.path.join(out_dir, "comparison.png")))
    return written
