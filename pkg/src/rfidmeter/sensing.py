"""Current-sensing front end: shunt stage and the V_out/current calibration.

The front end is modeled as the measured calibration mapping rather than a
single shunt resistance: the transformer+rectifier chain is nonlinear, so
the table of (V_out, current) points is the reference, interpolated
piecewise-linearly in both directions. The shunt law V = I*R is still
exposed as the physical first stage.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass


class SensingError(Exception):
    pass


class NegativeCurrent(SensingError):
    pass


class CurrentAboveCalibration(SensingError):
    def __init__(self, current: float, max_current: float):
        super().__init__(
            f"current {current:.6f} A exceeds calibrated range (max {max_current:.6f} A)"
        )
        self.current = current
        self.max_current = max_current


class CalibrationError(ValueError):
    """Bad calibration data; carries the offending row number when known."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class ShuntConfig:
    r_shunt: float  # ohms

    def __post_init__(self) -> None:
        if self.r_shunt <= 0:
            raise ValueError(f"r_shunt must be positive, got {self.r_shunt}")


@dataclass(frozen=True)
class CalibrationTable:
    """Monotone (V_out, current) point set; a bijection on its range."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise CalibrationError("calibration table is empty")
        if self.points[0] != (0.0, 0.0):
            raise CalibrationError(f"first point must be (0.0, 0.0), got {self.points[0]}")
        for i in range(1, len(self.points)):
            v0, c0 = self.points[i - 1]
            v1, c1 = self.points[i]
            if v1 <= v0:
                raise CalibrationError(f"vout not strictly increasing at point {i}: {v1} <= {v0}")
            if c1 <= c0:
                raise CalibrationError(
                    f"current not strictly increasing at point {i}: {c1} <= {c0}"
                )

    @property
    def max_vout(self) -> float:
        return self.points[-1][0]

    @property
    def max_current(self) -> float:
        return self.points[-1][1]


def default_calibration() -> CalibrationTable:
    """Factory-measured reference points for the three test bulbs."""
    return CalibrationTable(
        (
            (0.0, 0.0),
            (1.2, 0.0625),
            (2.2, 0.1042),
            (3.5, 0.250),
        )
    )


def load_calibration_csv(path: str) -> CalibrationTable:
    """Load a table from CSV with header vout_volts,current_amps."""
    points: list[tuple[float, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["vout_volts", "current_amps"]:
            raise CalibrationError(f"expected header vout_volts,current_amps, got {header}", row=1)
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise CalibrationError(f"expected 2 columns, got {len(row)}", row=row_no)
            try:
                points.append((float(row[0]), float(row[1])))
            except ValueError:
                raise CalibrationError(f"non-numeric value in {row}", row=row_no) from None
    try:
        return CalibrationTable(tuple(points))
    except CalibrationError as exc:
        raise CalibrationError(f"invalid table in {path}: {exc}") from exc


def shunt_voltage(current: float, cfg: ShuntConfig) -> float:
    """Voltage drop across the shunt: current * r_shunt."""
    if current < 0:
        raise NegativeCurrent(f"current must be >= 0, got {current}")
    return current * cfg.r_shunt


def lookup_current(vout: float, table: CalibrationTable) -> float:
    """Firmware direction: sensed DC volts -> amperes.

    Exact at table nodes, linear between them, clamped to the top node's
    current above the calibrated range.
    """
    if vout < 0:
        raise ValueError(f"vout must be >= 0, got {vout}")
    vs = [p[0] for p in table.points]
    if vout >= table.max_vout:
        return table.max_current
    idx = bisect_right(vs, vout) - 1
    v_lo, c_lo = table.points[idx]
    v_hi, c_hi = table.points[idx + 1]
    return c_lo + (vout - v_lo) * (c_hi - c_lo) / (v_hi - v_lo)


def sense_vout(true_power: float, table: CalibrationTable, mains: float) -> float:
    """Simulation direction: true load power -> the DC volts the meter sees.

    Inverts the calibration on the current axis; exact inverse of
    lookup_current on the table's range.
    """
    if true_power < 0:
        raise ValueError(f"true_power must be >= 0, got {true_power}")
    if mains <= 0:
        raise ValueError(f"mains must be positive, got {mains}")
    current = true_power / mains
    if current > table.max_current:
        raise CurrentAboveCalibration(current, table.max_current)
    cs = [p[1] for p in table.points]
    if current >= table.max_current:
        return table.max_vout
    idx = bisect_right(cs, current) - 1
    v_lo, c_lo = table.points[idx]
    v_hi, c_hi = table.points[idx + 1]
    return v_lo + (current - c_lo) * (v_hi - v_lo) / (c_hi - c_lo)
