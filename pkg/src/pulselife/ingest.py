"""Parse portable cycler files, segment DCIR pulse sequences, summarize cycles.

File formats (one cell = one time-series CSV + one metadata JSON, plus an
optional per-cycle summary CSV):

* time-series CSV header:
  ``cycle_index,step_index,step_type,time_s,current_a,voltage_v,capacity_ah``
  with step_type one of cc_charge/cv_hold/cc_discharge/pulse_discharge/rest
  or empty. time_s is non-decreasing within a step; capacity_ah is cumulative
  within a step (may be empty, in which case it is integrated from current).
* metadata JSON keys: cell_id, manufacturer, temperature_c, v_min, v_max,
  nominal_capacity_ah, group_id.
* summary CSV header:
  ``cycle_index,discharge_capacity_ah,charge_capacity_ah,is_diagnostic``.

Numbers are written in shortest round-trip decimal form, so
parse(write(dataset)) reproduces every numeric field bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datamodel import (
    STEP_LABELS,
    STEP_NAMES,
    UNKNOWN_STEP,
    CellMeta,
    CyclerRecord,
    CycleSummary,
    StepType,
)
from .errors import (
    AmbiguousSegmentation,
    OrderingError,
    PulseCountError,
    SchemaError,
    UnitError,
)

__all__ = [
    "CyclerRecords",
    "CellDataset",
    "PulseMeasurement",
    "parse_cell",
    "write_cell",
    "read_cell_meta",
    "compute_summaries",
    "diagnostic_cycles",
    "segment_pulses",
    "cycle_discharge_curve",
]

TIMESERIES_COLUMNS = (
    "cycle_index",
    "step_index",
    "step_type",
    "time_s",
    "current_a",
    "voltage_v",
    "capacity_ah",
)
SUMMARY_COLUMNS = ("cycle_index", "discharge_capacity_ah", "charge_capacity_ah", "is_diagnostic")
META_KEYS = (
    "cell_id",
    "manufacturer",
    "temperature_c",
    "v_min",
    "v_max",
    "nominal_capacity_ah",
    "group_id",
)

# pulse-signature detection bounds (seconds / fractions of the 1C current)
_PULSE_MIN_S = 5.0
_PULSE_MAX_S = 15.0
_PULSE_MERGED_S = 30.0
_PULSE_CURRENT_FRAC = 0.8
_QUIET_CURRENT_FRAC = 1.0 / 50.0
_QUIET_SPAN_S = 60.0
_VOLTAGE_SLACK_V = 0.2


@dataclass
class CyclerRecords:
    """Column-oriented record store, sorted by (cycle, step, time)."""

    cycle_index: np.ndarray
    step_index: np.ndarray
    step_type: np.ndarray
    time_s: np.ndarray
    current_a: np.ndarray
    voltage_v: np.ndarray
    capacity_ah: np.ndarray

    def __post_init__(self) -> None:
        self.cycle_index = np.asarray(self.cycle_index, dtype=np.int64)
        self.step_index = np.asarray(self.step_index, dtype=np.int64)
        self.step_type = np.asarray(self.step_type, dtype=np.int8)
        for name in ("time_s", "current_a", "voltage_v", "capacity_ah"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    def __len__(self) -> int:
        return int(self.cycle_index.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CyclerRecords):
            return NotImplemented
        return (
            np.array_equal(self.cycle_index, other.cycle_index)
            and np.array_equal(self.step_index, other.step_index)
            and np.array_equal(self.step_type, other.step_type)
            and np.array_equal(self.time_s, other.time_s)
            and np.array_equal(self.current_a, other.current_a)
            and np.array_equal(self.voltage_v, other.voltage_v)
            and np.array_equal(self.capacity_ah, other.capacity_ah, equal_nan=True)
        )

    def row(self, i: int) -> CyclerRecord:
        return CyclerRecord(
            int(self.cycle_index[i]),
            int(self.step_index[i]),
            int(self.step_type[i]),
            float(self.time_s[i]),
            float(self.current_a[i]),
            float(self.voltage_v[i]),
            float(self.capacity_ah[i]),
        )

    def take(self, idx: np.ndarray) -> "CyclerRecords":
        return CyclerRecords(
            self.cycle_index[idx],
            self.step_index[idx],
            self.step_type[idx],
            self.time_s[idx],
            self.current_a[idx],
            self.voltage_v[idx],
            self.capacity_ah[idx],
        )

    def canonical_sort(self) -> "CyclerRecords":
        """Stable sort by (cycle_index, step_index, time_s)."""
        order = np.lexsort((self.time_s, self.step_index, self.cycle_index))
        return self.take(order)

    def cycles(self) -> np.ndarray:
        return np.unique(self.cycle_index)

    def cycle_indices(self, cycle: int) -> np.ndarray:
        """Row indices belonging to one cycle (records assumed sorted)."""
        lo = int(np.searchsorted(self.cycle_index, cycle, side="left"))
        hi = int(np.searchsorted(self.cycle_index, cycle, side="right"))
        return np.arange(lo, hi)

    def has_step_labels(self) -> bool:
        return bool((self.step_type != UNKNOWN_STEP).any())


@dataclass
class CellDataset:
    """All records and per-cycle summaries for one cell.

    Records cover the cycles where the time series was retained; summaries
    cover every cycle (they may extend beyond the recorded window, which is
    how long lifetime curves stay affordable). Every recorded cycle has a
    summary.
    """

    meta: CellMeta
    records: CyclerRecords
    summaries: list[CycleSummary]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CellDataset):
            return NotImplemented
        return (
            self.meta == other.meta
            and self.records == other.records
            and self.summaries == other.summaries
        )

    def summary_for(self, cycle: int) -> CycleSummary:
        for s in self.summaries:
            if s.cycle_index == cycle:
                return s
        raise KeyError(f"no summary for cycle {cycle}")


@dataclass(frozen=True)
class PulseMeasurement:
    """One DCIR pulse and the partial discharge segment it delimits.

    soc_nominal = 1 - 0.1 * pulse_index (pulse 0 sits at 100% SOC).
    partial_q holds the (voltage_v, capacity_ah) samples of the constant-
    current discharge segment between this pulse and the next checkpoint,
    with capacity rebased to zero at the segment start (discharge-positive).
    """

    cycle_index: int
    pulse_index: int
    soc_nominal: float
    i_pulse_a: float
    v_before: float
    v_end: float
    duration_s: float
    partial_q: np.ndarray

    def resistance_ohm(self) -> float:
        return (self.v_before - self.v_end) / abs(self.i_pulse_a)


# --------------------------------------------------------------------------
# validation


def _check_ordering(rec: CyclerRecords) -> None:
    if len(rec) < 2:
        return
    dc = np.diff(rec.cycle_index)
    ds = np.diff(rec.step_index)
    dt = np.diff(rec.time_s)
    ok = (dc > 0) | ((dc == 0) & (ds > 0)) | ((dc == 0) & (ds == 0) & (dt >= 0))
    if not ok.all():
        i = int(np.argmin(ok))
        raise OrderingError(
            f"records out of order near row {i + 1}: "
            f"cycle {rec.cycle_index[i]}->{rec.cycle_index[i + 1]}, "
            f"step {rec.step_index[i]}->{rec.step_index[i + 1]}, "
            f"time {rec.time_s[i]}->{rec.time_s[i + 1]}"
        )


def _step_boundaries(rec: CyclerRecords) -> np.ndarray:
    """Indices where a new (cycle, step) begins, plus the terminal index."""
    if len(rec) == 0:
        return np.array([0], dtype=np.int64)
    change = (np.diff(rec.cycle_index) != 0) | (np.diff(rec.step_index) != 0)
    starts = np.concatenate(([0], np.flatnonzero(change) + 1, [len(rec)]))
    return starts


def _check_units(rec: CyclerRecords) -> None:
    starts = _step_boundaries(rec)
    for a, b in zip(starts[:-1], starts[1:]):
        st = rec.step_type[a]
        if st in (StepType.CC_DISCHARGE, StepType.PULSE_DISCHARGE):
            q = rec.capacity_ah[a:b]
            q = q[np.isfinite(q)]
            if q.size >= 2 and np.any(np.diff(q) < -1e-12):
                raise UnitError(
                    f"capacity decreases within discharge step "
                    f"(cycle {rec.cycle_index[a]}, step {rec.step_index[a]})"
                )


def _check_voltage_window(rec: CyclerRecords, meta: CellMeta) -> None:
    lo = meta.v_min - _VOLTAGE_SLACK_V
    hi = meta.v_max + _VOLTAGE_SLACK_V
    v = rec.voltage_v
    bad = int(((v < lo) | (v > hi)).sum())
    if bad:
        warnings.warn(
            f"{meta.cell_id}: {bad} samples outside [{lo:.3f}, {hi:.3f}] V",
            stacklevel=3,
        )


def validate_records(rec: CyclerRecords, meta: CellMeta) -> None:
    """Ordering, unit, and finiteness checks; voltage excursions only warn."""
    for name in ("time_s", "current_a", "voltage_v"):
        if not np.isfinite(getattr(rec, name)).all():
            raise SchemaError(f"non-finite values in column {name}")
    _check_ordering(rec)
    _check_units(rec)
    _check_voltage_window(rec, meta)


# --------------------------------------------------------------------------
# summaries


def _step_total_capacity(rec: CyclerRecords, a: int, b: int) -> float:
    q = rec.capacity_ah[a:b]
    if np.isfinite(q).all() and q.size:
        return float(q[-1] - q[0])
    # capacity column absent: integrate |I| dt (trapezoid)
    t = rec.time_s[a:b]
    i = np.abs(rec.current_a[a:b])
    if t.size < 2:
        return 0.0
    return float(np.trapezoid(i, t) / 3600.0)


def compute_summaries(rec: CyclerRecords, meta: CellMeta) -> list[CycleSummary]:
    """Per-cycle charge/discharge totals recomputed from the records.

    Step direction follows the sign of the step's median current, so the
    computation works whether or not step_type labels are present. A cycle is
    flagged diagnostic when it contains a pulse step or its discharge runs at
    low rate (below C/5), which covers both members of the periodic low-rate
    diagnostic pair.
    """
    i_1c = meta.nominal_capacity_ah
    starts = _step_boundaries(rec)
    out: list[CycleSummary] = []
    cur_cycle: int | None = None
    dis = chg = 0.0
    diag = False
    dis_currents: list[np.ndarray] = []

    def flush() -> None:
        nonlocal dis, chg, diag, dis_currents
        if cur_cycle is None:
            return
        low_rate = False
        if dis_currents:
            med = float(np.median(np.abs(np.concatenate(dis_currents))))
            low_rate = med < 0.2 * i_1c
        out.append(CycleSummary(int(cur_cycle), dis, chg, diag or low_rate))
        dis = chg = 0.0
        diag = False
        dis_currents = []

    for a, b in zip(starts[:-1], starts[1:]):
        c = int(rec.cycle_index[a])
        if c != cur_cycle:
            flush()
            cur_cycle = c
        med_i = float(np.median(rec.current_a[a:b]))
        total = _step_total_capacity(rec, a, b)
        if med_i < -i_1c / 200.0:
            dis += total
            if rec.step_type[a] == StepType.PULSE_DISCHARGE:
                diag = True
            else:
                dis_currents.append(rec.current_a[a:b])
        elif med_i > i_1c / 200.0:
            chg += total
    flush()
    return out


# --------------------------------------------------------------------------
# pulse segmentation


def _detect_pulse_runs(t: np.ndarray, i: np.ndarray, i_1c: float) -> list[tuple[int, int]]:
    """Maximal high-current runs that qualify as pulses, by current signature.

    A qualifying run has |I| >= 0.8 * I_1C, lasts 5-15 s, and is preceded by
    at least 60 s of |I| <= I_1C / 50. Runs of 15-30 s cannot be told apart
    from merged pulses and raise AmbiguousSegmentation; longer runs are
    ordinary discharge.
    """
    high = np.abs(i) >= _PULSE_CURRENT_FRAC * i_1c
    if not high.any():
        return []
    edges = np.diff(high.astype(np.int8))
    starts = list(np.flatnonzero(edges == 1) + 1)
    ends = list(np.flatnonzero(edges == -1))
    if high[0]:
        starts.insert(0, 0)
    if high[-1]:
        ends.append(len(high) - 1)
    runs: list[tuple[int, int]] = []
    for s, e in zip(starts, ends):
        dur = t[e] - t[s]
        if dur < _PULSE_MIN_S or dur > _PULSE_MERGED_S:
            continue
        if dur > _PULSE_MAX_S:
            raise AmbiguousSegmentation(
                f"high-current run of {dur:.1f} s could be merged pulses"
            )
        window = (t >= t[s] - _QUIET_SPAN_S) & (t < t[s])
        if not window.any():
            continue
        if np.abs(i[window]).max() > _QUIET_CURRENT_FRAC * i_1c:
            continue
        runs.append((s, e))
    return runs


def _rebased_partial(rec: CyclerRecords, idx: np.ndarray) -> np.ndarray:
    """(voltage, capacity) samples with capacity accumulated across steps."""
    if idx.size == 0:
        return np.empty((0, 2))
    v = rec.voltage_v[idx]
    q = rec.capacity_ah[idx].copy()
    if not np.isfinite(q).all():
        t = rec.time_s[idx]
        cur = np.abs(rec.current_a[idx])
        q = np.concatenate(([0.0], np.cumsum(0.5 * (cur[1:] + cur[:-1]) * np.diff(t) / 3600.0)))
        return np.column_stack((v, q))
    steps = rec.step_index[idx]
    out = np.empty_like(q)
    offset = 0.0
    pos = 0
    for s in np.unique(steps):
        m = steps == s
        seg = q[m]
        out[pos : pos + seg.size] = seg - seg[0] + offset
        offset += seg[-1] - seg[0]
        pos += seg.size
    return np.column_stack((v, out))


def segment_pulses(cell: CellDataset, diagnostic_cycle: int) -> list[PulseMeasurement]:
    """The 10 DCIR pulses of a diagnostic cycle, ordered k = 0..9.

    Uses step_type labels when present; otherwise falls back to current-
    signature detection. v_before is the last rest-step sample preceding the
    pulse, v_end the last sample within the pulse.

    Raises PulseCountError unless exactly 10 pulses are found, and
    AmbiguousSegmentation when signature detection cannot separate runs.
    """
    rec = cell.records
    idx = rec.cycle_indices(diagnostic_cycle)
    if idx.size == 0:
        raise PulseCountError(f"cycle {diagnostic_cycle} has no records")
    sub = rec.take(idx)
    i_1c = cell.meta.nominal_capacity_ah
    if sub.has_step_labels():
        spans = _labeled_pulse_spans(sub)
    else:
        spans = _detect_pulse_runs(sub.time_s, sub.current_a, i_1c)
    if len(spans) != 10:
        raise PulseCountError(
            f"cycle {diagnostic_cycle}: expected 10 pulses, found {len(spans)}"
        )
    pulses: list[PulseMeasurement] = []
    for k, (s, e) in enumerate(spans):
        i_pulse = float(np.median(sub.current_a[s : e + 1]))
        v_before = _pre_pulse_rest_voltage(sub, s, i_1c)
        nxt = spans[k + 1][0] if k + 1 < len(spans) else len(sub)
        part_idx = _partial_segment_indices(sub, e + 1, nxt, i_1c)
        pulses.append(
            PulseMeasurement(
                cycle_index=diagnostic_cycle,
                pulse_index=k,
                soc_nominal=1.0 - 0.1 * k,
                i_pulse_a=i_pulse,
                v_before=v_before,
                v_end=float(sub.voltage_v[e]),
                duration_s=float(sub.time_s[e] - sub.time_s[s]),
                partial_q=_rebased_partial(sub, part_idx),
            )
        )
    return pulses


def _labeled_pulse_spans(sub: CyclerRecords) -> list[tuple[int, int]]:
    mask = sub.step_type == StepType.PULSE_DISCHARGE
    if not mask.any():
        return []
    steps = sub.step_index[mask]
    spans = []
    for s in np.unique(steps):
        rows = np.flatnonzero(mask & (sub.step_index == s))
        spans.append((int(rows[0]), int(rows[-1])))
    return spans


def _pre_pulse_rest_voltage(sub: CyclerRecords, pulse_start: int, i_1c: float) -> float:
    before = np.arange(pulse_start)
    if sub.has_step_labels():
        rest = before[sub.step_type[before] == StepType.REST]
    else:
        rest = before[np.abs(sub.current_a[before]) <= _QUIET_CURRENT_FRAC * i_1c]
    if rest.size == 0:
        raise AmbiguousSegmentation("no rest samples precede a pulse")
    return float(sub.voltage_v[rest[-1]])


def _partial_segment_indices(
    sub: CyclerRecords, lo: int, hi: int, i_1c: float
) -> np.ndarray:
    rows = np.arange(lo, hi)
    if sub.has_step_labels():
        return rows[sub.step_type[rows] == StepType.CC_DISCHARGE]
    i = sub.current_a[rows]
    cc = (i < -_QUIET_CURRENT_FRAC * i_1c) & (i > -_PULSE_CURRENT_FRAC * i_1c)
    return rows[cc]


def diagnostic_cycles(cell: CellDataset) -> list[int]:
    """Cycles containing a DCIR pulse sequence, sorted ascending.

    With step labels this is the set of cycles holding pulse_discharge steps;
    without labels, current-signature detection is applied per cycle (cycles
    whose signature is ambiguous are not reported).
    """
    rec = cell.records
    if rec.has_step_labels():
        mask = rec.step_type == StepType.PULSE_DISCHARGE
        return [int(c) for c in np.unique(rec.cycle_index[mask])]
    out = []
    i_1c = cell.meta.nominal_capacity_ah
    for c in rec.cycles():
        idx = rec.cycle_indices(int(c))
        try:
            runs = _detect_pulse_runs(rec.time_s[idx], rec.current_a[idx], i_1c)
        except AmbiguousSegmentation:
            continue
        if runs:
            out.append(int(c))
    return out


def cycle_discharge_curve(cell: CellDataset, cycle: int) -> np.ndarray:
    """(voltage, capacity) samples of a cycle's constant-current discharge.

    Capacity accumulates across the cycle's cc_discharge steps. Without step
    labels, discharge samples are identified by current sign and the
    high-current pulse band is excluded.
    """
    rec = cell.records
    idx = rec.cycle_indices(cycle)
    if idx.size == 0:
        raise KeyError(f"cycle {cycle} has no records")
    sub = rec.take(idx)
    rows = np.arange(len(sub))
    if sub.has_step_labels():
        rows = rows[sub.step_type == StepType.CC_DISCHARGE]
    else:
        i_1c = cell.meta.nominal_capacity_ah
        i = sub.current_a
        rows = rows[(i < -i_1c / 200.0) & (np.abs(i) < _PULSE_CURRENT_FRAC * i_1c)]
    return _rebased_partial(sub, rows)


# --------------------------------------------------------------------------
# file IO


def _fmt(x: float) -> str:
    if np.isnan(x):
        return ""
    return repr(float(x))


def write_cell(
    dataset: CellDataset,
    timeseries_path: str | Path,
    meta_path: str | Path,
    summary_path: str | Path | None = None,
) -> None:
    """Write a cell in the portable CSV/JSON formats (canonical formatting)."""
    rec = dataset.records
    with open(timeseries_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMESERIES_COLUMNS)
        for i in range(len(rec)):
            st = int(rec.step_type[i])
            w.writerow(
                (
                    int(rec.cycle_index[i]),
                    int(rec.step_index[i]),
                    STEP_NAMES.get(st, ""),
                    _fmt(rec.time_s[i]),
                    _fmt(rec.current_a[i]),
                    _fmt(rec.voltage_v[i]),
                    _fmt(rec.capacity_ah[i]),
                )
            )
    meta = dataset.meta
    payload = {
        "cell_id": meta.cell_id,
        "manufacturer": meta.manufacturer,
        "temperature_c": meta.temperature_c,
        "v_min": meta.v_min,
        "v_max": meta.v_max,
        "nominal_capacity_ah": meta.nominal_capacity_ah,
        "group_id": meta.group_id,
    }
    with open(meta_path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    if summary_path is not None:
        with open(summary_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_COLUMNS)
            for s in dataset.summaries:
                w.writerow(
                    (
                        s.cycle_index,
                        _fmt(s.discharge_capacity_ah),
                        _fmt(s.charge_capacity_ah),
                        str(bool(s.is_diagnostic)).lower(),
                    )
                )


def read_cell_meta(meta_path: str | Path) -> CellMeta:
    """Load and validate one metadata JSON."""
    return _parse_meta(meta_path)


def _parse_meta(meta_path: str | Path) -> CellMeta:
    try:
        with open(meta_path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{meta_path}: invalid JSON ({exc})") from exc
    missing = [k for k in META_KEYS if k not in raw]
    if missing:
        raise SchemaError(f"{meta_path}: missing keys {missing}")
    try:
        return CellMeta(
            cell_id=str(raw["cell_id"]),
            manufacturer=str(raw["manufacturer"]),
            temperature_c=float(raw["temperature_c"]),
            v_min=float(raw["v_min"]),
            v_max=float(raw["v_max"]),
            nominal_capacity_ah=float(raw["nominal_capacity_ah"]),
            group_id=str(raw["group_id"]),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{meta_path}: {exc}") from exc


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in {"true", "1"}:
        return True
    if t in {"false", "0"}:
        return False
    raise SchemaError(f"bad boolean value {text!r}")


def _parse_summaries(summary_path: str | Path) -> list[CycleSummary]:
    out: list[CycleSummary] = []
    with open(summary_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SUMMARY_COLUMNS:
            raise SchemaError(f"{summary_path}: bad header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise SchemaError(f"{summary_path}:{lineno}: expected 4 fields")
            try:
                out.append(
                    CycleSummary(int(row[0]), float(row[1]), float(row[2]), _parse_bool(row[3]))
                )
            except ValueError as exc:
                raise SchemaError(f"{summary_path}:{lineno}: {exc}") from exc
    return out


def parse_cell(
    timeseries_path: str | Path,
    meta_path: str | Path,
    summary_path: str | Path | None = None,
) -> CellDataset:
    """Parse and validate one cell.

    Summaries are taken from the summary CSV when given (they may cover more
    cycles than the recorded window), otherwise recomputed from the records.

    Raises SchemaError for malformed files, OrderingError when time runs
    backwards within a step, and UnitError when capacity decreases within a
    discharge step.
    """
    meta = _parse_meta(meta_path)
    cols: tuple[list, ...] = ([], [], [], [], [], [], [])
    with open(timeseries_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TIMESERIES_COLUMNS:
            raise SchemaError(f"{timeseries_path}: bad header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 7:
                raise SchemaError(f"{timeseries_path}:{lineno}: expected 7 fields")
            try:
                cols[0].append(int(row[0]))
                cols[1].append(int(row[1]))
                st = row[2].strip()
                if st:
                    if st not in STEP_LABELS:
                        raise ValueError(f"unknown step_type {st!r}")
                    cols[2].append(STEP_LABELS[st])
                else:
                    cols[2].append(UNKNOWN_STEP)
                cols[3].append(float(row[3]))
                cols[4].append(float(row[4]))
                cols[5].append(float(row[5]))
                cols[6].append(float(row[6]) if row[6].strip() else np.nan)
            except ValueError as exc:
                raise SchemaError(f"{timeseries_path}:{lineno}: {exc}") from exc
    records = CyclerRecords(*cols)
    validate_records(records, meta)
    if summary_path is not None:
        summaries = _parse_summaries(summary_path)
        recorded = set(int(c) for c in records.cycles())
        known = set(s.cycle_index for s in summaries)
        if not recorded <= known:
            raise SchemaError(
                f"{summary_path}: summaries missing recorded cycles {sorted(recorded - known)[:5]}"
            )
    else:
        summaries = compute_summaries(records, meta)
    return CellDataset(meta=meta, records=records, summaries=summaries)
