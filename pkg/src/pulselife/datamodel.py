"""Core domain types, unit conventions, and end-of-life labeling.

Conventions used throughout the package: currents are signed amperes with
discharge negative, capacities are amp-hours, voltages are volts, and time
is seconds. State of health (SOH) is the discharge capacity of a regular
cycle divided by a reference capacity; end of life (EOL) is the (possibly
fractional) cycle at which the SOH curve first reaches a threshold.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, InsufficientData, NonDecaying

__all__ = [
    "StepType",
    "SohReference",
    "CellMeta",
    "CyclerRecord",
    "CycleSummary",
    "EolLabel",
    "compute_soh",
    "label_eol",
]


class StepType(enum.IntEnum):
    """Protocol step kinds as stored in the records' step_type column."""

    CC_CHARGE = 0
    CV_HOLD = 1
    CC_DISCHARGE = 2
    PULSE_DISCHARGE = 3
    REST = 4

    @property
    def label(self) -> str:
        return self.name.lower()


STEP_LABELS = {s.label: int(s) for s in StepType}
STEP_NAMES = {int(s): s.label for s in StepType}
UNKNOWN_STEP = -1  # step_type column was empty


class SohReference(enum.Enum):
    """Which capacity defines 100% SOH.

    FIRST_REGULAR: discharge capacity of the first regular (full-rate) cycle
    after the initial low-rate diagnostics. Diagnostic cycles carry a
    rate-dependent capacity offset, so they are excluded from the SOH curve.
    FIRST_CYCLE: discharge capacity of the first summary regardless of kind.
    NOMINAL: the cell's nameplate capacity; used when comparing against
    planted fade curves, whose closed form is expressed in nameplate units.
    """

    FIRST_REGULAR = "first_regular"
    FIRST_CYCLE = "first_cycle"
    NOMINAL = "nominal"


@dataclass(frozen=True)
class CellMeta:
    """Identity and test conditions for one cell.

    group_id names the triplicate: cells sharing it were built by the same
    manufacturer and cycled at the same temperature and voltage range.
    """

    cell_id: str
    manufacturer: str
    temperature_c: float
    v_min: float
    v_max: float
    nominal_capacity_ah: float
    group_id: str

    def __post_init__(self) -> None:
        if not self.v_min < self.v_max:
            raise ValueError(f"v_min must be < v_max, got [{self.v_min}, {self.v_max}]")
        if not self.nominal_capacity_ah > 0:
            raise ValueError(f"nominal capacity must be positive, got {self.nominal_capacity_ah}")

    @property
    def condition(self) -> tuple[float, float, float]:
        """(temperature, v_min, v_max) — the operating-condition key."""
        return (self.temperature_c, self.v_min, self.v_max)


@dataclass(frozen=True)
class CyclerRecord:
    """One time-stamped sample within a step of a cycle."""

    cycle_index: int
    step_index: int
    step_type: int  # StepType value, or UNKNOWN_STEP
    time_s: float
    current_a: float  # signed; discharge negative
    voltage_v: float
    capacity_ah: float  # cumulative within the step


@dataclass(frozen=True)
class CycleSummary:
    """Per-cycle capacity totals.

    is_diagnostic marks the low-rate cycles of the periodic diagnostic
    sequence (both the plain low-rate cycle and the pulsed one); these are
    excluded from the SOH curve because their capacity differs by rate.
    """

    cycle_index: int
    discharge_capacity_ah: float
    charge_capacity_ah: float
    is_diagnostic: bool


@dataclass(frozen=True)
class EolLabel:
    """Cycles to a fixed-SOH end-of-life condition.

    cycles_to_eol may be fractional; extrapolated is True when the crossing
    was obtained from a linear fit of the trailing cycles rather than
    observed directly.
    """

    soh_threshold: float
    cycles_to_eol: float
    extrapolated: bool


def _regular_curve(summaries: list[CycleSummary]) -> tuple[np.ndarray, np.ndarray]:
    pts = sorted(
        ((s.cycle_index, s.discharge_capacity_ah) for s in summaries if not s.is_diagnostic),
    )
    if not pts:
        return np.empty(0), np.empty(0)
    cycles, caps = zip(*pts)
    return np.asarray(cycles, dtype=np.float64), np.asarray(caps, dtype=np.float64)


def _reference_capacity(
    summaries: list[CycleSummary],
    reference: SohReference,
    nominal_capacity_ah: float | None,
) -> float:
    if reference is SohReference.NOMINAL:
        if nominal_capacity_ah is None or nominal_capacity_ah <= 0:
            raise ValueError("NOMINAL reference requires a positive nominal_capacity_ah")
        return float(nominal_capacity_ah)
    if reference is SohReference.FIRST_CYCLE:
        ordered = sorted(summaries, key=lambda s: s.cycle_index)
        if not ordered:
            raise EmptyDataset("no cycles present")
        return float(ordered[0].discharge_capacity_ah)
    cycles, caps = _regular_curve(summaries)
    if cycles.size == 0:
        raise EmptyDataset("no regular (non-diagnostic) cycles present")
    return float(caps[0])


def compute_soh(
    summaries: list[CycleSummary],
    reference: SohReference = SohReference.FIRST_REGULAR,
    *,
    nominal_capacity_ah: float | None = None,
) -> list[tuple[int, float]]:
    """SOH curve over the regular (non-diagnostic) cycles.

    Returns (cycle_index, soh) pairs sorted by cycle. The reference capacity
    is fixed by ``reference``; with FIRST_REGULAR the SOH at the reference
    cycle is exactly 1.0.

    Raises EmptyDataset when no qualifying cycle exists.
    """
    cycles, caps = _regular_curve(summaries)
    if cycles.size == 0:
        raise EmptyDataset("no regular (non-diagnostic) cycles present")
    q_ref = _reference_capacity(summaries, reference, nominal_capacity_ah)
    soh = caps / q_ref
    return [(int(c), float(s)) for c, s in zip(cycles, soh)]


def _interp_crossing(cycles: np.ndarray, soh: np.ndarray, threshold: float) -> float | None:
    """First linearly interpolated crossing of soh <= threshold, or None."""
    below = soh <= threshold
    if not below.any():
        return None
    i = int(np.argmax(below))
    if i == 0:
        return float(cycles[0])
    c0, c1 = cycles[i - 1], cycles[i]
    s0, s1 = soh[i - 1], soh[i]
    if s0 == s1:
        return float(c1)
    return float(c0 + (s0 - threshold) * (c1 - c0) / (s0 - s1))


def label_eol(
    summaries: list[CycleSummary],
    soh_threshold: float,
    *,
    reference: SohReference = SohReference.FIRST_REGULAR,
    nominal_capacity_ah: float | None = None,
    extrapolation_window: int = 100,
) -> EolLabel:
    """End-of-life label for a fixed SOH threshold.

    If the SOH curve crosses the threshold, the crossing cycle is linearly
    interpolated between the adjacent observations. Otherwise a line is fit
    by least squares to the last ``extrapolation_window`` regular cycles and
    extrapolated to the threshold.

    Fractional cycles are returned as-is; round only in reports.

    Raises:
        NonDecaying: the extrapolation slope is >= 0, so the threshold is
            never reached.
        InsufficientData: fewer regular cycles than the extrapolation window
            when extrapolation is needed, or fewer than 2 overall.
        EmptyDataset: no regular cycles at all.
    """
    if not 0.0 < soh_threshold < 1.0:
        raise ValueError(f"soh_threshold must be in (0, 1), got {soh_threshold}")
    pairs = compute_soh(summaries, reference, nominal_capacity_ah=nominal_capacity_ah)
    cycles = np.array([c for c, _ in pairs], dtype=np.float64)
    soh = np.array([s for _, s in pairs], dtype=np.float64)
    crossing = _interp_crossing(cycles, soh, soh_threshold)
    if crossing is not None:
        return EolLabel(soh_threshold, crossing, extrapolated=False)
    if cycles.size < 2:
        raise InsufficientData("need at least 2 regular cycles to extrapolate")
    if cycles.size < extrapolation_window:
        raise InsufficientData(
            f"extrapolation needs {extrapolation_window} regular cycles, have {cycles.size}"
        )
    tail_c = cycles[-extrapolation_window:]
    tail_s = soh[-extrapolation_window:]
    slope, intercept = np.polyfit(tail_c, tail_s, 1)
    if slope >= 0:
        raise NonDecaying(f"trailing SOH slope {slope:.3e} >= 0; threshold never reached")
    crossing = (soh_threshold - intercept) / slope
    return EolLabel(soh_threshold, float(crossing), extrapolated=True)
