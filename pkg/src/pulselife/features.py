"""The four early-cycle feature families, computed from the first 102 cycles.

* ``dqv.*`` (6): statistics of the pointwise difference between the low-rate
  discharge capacity-vs-voltage curves of cycles 101 and 1, interpolated onto
  a shared voltage grid.
* ``rdcir.c{2,102}.p{0..9}`` (20): effective resistance (v_before - v_end) /
  |I| of each of the 10 pulses in the two diagnostic cycles.
* ``dqdcir.p{0..9}.*`` (60): the same six statistics on the difference of the
  per-pulse partial discharge curves between cycles 102 and 2, each pair
  interpolated onto the intersection of its voltage spans.
* ``fit.p1``, ``fit.p2`` (2): slope and intercept of a least-squares line
  through discharge capacity vs. cycle over the regular cycles 30-99.

Statistics use population moments: var = m2, skew = m3 / m2^1.5, excess
kurtosis = m4 / m2^2 - 3, with the zero-variance convention skew = kurt = 0.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import (
    EmptyOverlap,
    InsufficientData,
    LengthMismatch,
    MissingCycle,
    NonPositiveResistanceWarning,
    PulselifeError,
    SpanError,
)
from .ingest import CellDataset, cycle_discharge_curve, segment_pulses

__all__ = [
    "STAT_NAMES",
    "FEATURE_NAMES",
    "FEATURE_FAMILIES",
    "VoltageGrid",
    "FeatureVector",
    "FeatureConfig",
    "DeltaStats",
    "interp_qv",
    "delta_q_stats",
    "extract_dqv_features",
    "extract_r_dcir",
    "extract_dq_dcir_features",
    "extract_fit_features",
    "extract_all",
    "FeatureMatrix",
]

STAT_NAMES = ("mean", "min", "max", "var", "skew", "kurt")

_DQV_NAMES = tuple(f"dqv.{s}" for s in STAT_NAMES)
_RDCIR_NAMES = tuple(f"rdcir.c{c}.p{k}" for c in (2, 102) for k in range(10))
_DQDCIR_NAMES = tuple(f"dqdcir.p{k}.{s}" for k in range(10) for s in STAT_NAMES)
_FIT_NAMES = ("fit.p1", "fit.p2")

FEATURE_NAMES: tuple[str, ...] = _DQV_NAMES + _RDCIR_NAMES + _DQDCIR_NAMES + _FIT_NAMES

FEATURE_FAMILIES: dict[str, tuple[str, ...]] = {
    "dqv_only": _DQV_NAMES,
    "dqv_plus_fit": _DQV_NAMES + _FIT_NAMES,
    "dq_dcir": _DQDCIR_NAMES,
    "dcir_all": _RDCIR_NAMES + _DQDCIR_NAMES,
    "all": FEATURE_NAMES,
}

_SPAN_TOLERANCE = 0.02  # fraction of grid points allowed outside the curve span


class DeltaStats(NamedTuple):
    mean: float
    min: float
    max: float
    var: float
    skew: float
    kurt: float


@dataclass(frozen=True)
class VoltageGrid:
    """Uniform voltage grid on [v_lo, v_hi] with n_points points."""

    v_lo: float
    v_hi: float
    n_points: int

    def __post_init__(self) -> None:
        if not self.v_lo < self.v_hi:
            raise ValueError(f"need v_lo < v_hi, got [{self.v_lo}, {self.v_hi}]")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")

    def points(self) -> np.ndarray:
        return np.linspace(self.v_lo, self.v_hi, self.n_points)


@dataclass(frozen=True)
class FeatureVector:
    """Named feature values for one cell, in canonical order."""

    cell_id: str
    values: dict[str, float]

    def as_array(self, names: tuple[str, ...] = FEATURE_NAMES) -> np.ndarray:
        return np.array([self.values[n] for n in names], dtype=np.float64)


@dataclass(frozen=True)
class FeatureConfig:
    """Knobs of the extraction; defaults follow the standard protocol."""

    cycle_early: int = 1
    cycle_late: int = 101
    dcir_cycle_early: int = 2
    dcir_cycle_late: int = 102
    grid_points: int = 1000
    pulse_grid_points: int = 100
    fit_start: int = 30
    fit_end: int = 99


def _monotone_curve(curve: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort by voltage and average duplicate voltages so Q(V) is a function."""
    curve = np.asarray(curve, dtype=np.float64)
    if curve.ndim != 2 or curve.shape[1] != 2:
        raise ValueError("curve must be an (n, 2) array of (voltage, capacity)")
    if curve.shape[0] < 2:
        raise ValueError("curve needs at least 2 points")
    v, q = curve[:, 0], curve[:, 1]
    vu, inverse, counts = np.unique(v, return_inverse=True, return_counts=True)
    if vu.size == v.size:
        order = np.argsort(v, kind="stable")
        return v[order], q[order]
    sums = np.bincount(inverse, weights=q)
    return vu, sums / counts


def interp_qv(curve: np.ndarray, grid: VoltageGrid) -> np.ndarray:
    """Linearly interpolate a Q(V) curve onto a voltage grid.

    The curve is first rendered monotone in voltage (sorted, duplicate
    voltages averaged). Grid points slightly outside the curve's span are
    clamped to the endpoint values; if more than 2% of the grid falls
    outside, SpanError is raised.
    """
    v, q = _monotone_curve(curve)
    g = grid.points()
    outside = float(((g < v[0]) | (g > v[-1])).mean())
    if outside > _SPAN_TOLERANCE:
        raise SpanError(
            f"{outside:.1%} of grid points outside curve span [{v[0]:.4f}, {v[-1]:.4f}] V"
        )
    return np.interp(g, v, q)


def delta_q_stats(q_late: np.ndarray, q_early: np.ndarray) -> DeltaStats:
    """Six population statistics of the pointwise difference q_late - q_early.

    Raises LengthMismatch when the arrays differ in length.
    """
    q_late = np.asarray(q_late, dtype=np.float64)
    q_early = np.asarray(q_early, dtype=np.float64)
    if q_late.shape != q_early.shape or q_late.ndim != 1:
        raise LengthMismatch(f"shapes {q_late.shape} vs {q_early.shape}")
    if q_late.size == 0:
        raise LengthMismatch("empty input")
    mean, mn, mx, var, skew, kurt = _kernels.moments(q_late - q_early)
    return DeltaStats(float(mean), float(mn), float(mx), float(var), float(skew), float(kurt))


def _shared_grid(curve_a: np.ndarray, curve_b: np.ndarray, n_points: int) -> VoltageGrid:
    va, _ = _monotone_curve(curve_a)
    vb, _ = _monotone_curve(curve_b)
    lo = max(float(va[0]), float(vb[0]))
    hi = min(float(va[-1]), float(vb[-1]))
    if not lo < hi:
        raise EmptyOverlap(f"voltage spans [{va[0]:.4f},{va[-1]:.4f}] and "
                           f"[{vb[0]:.4f},{vb[-1]:.4f}] do not intersect")
    return VoltageGrid(lo, hi, n_points)


def extract_dqv_features(
    cell: CellDataset,
    cycle_late: int = 101,
    cycle_early: int = 1,
    grid: VoltageGrid | None = None,
    grid_points: int = 1000,
) -> dict[str, float]:
    """The ``dqv.*`` block: statistics of Q_late(V) - Q_early(V).

    With grid=None the grid spans the intersection of the two cycles'
    observed discharge voltage spans.
    """
    try:
        late = cycle_discharge_curve(cell, cycle_late)
        early = cycle_discharge_curve(cell, cycle_early)
    except KeyError as exc:
        raise MissingCycle(str(exc)) from exc
    if late.shape[0] < 2 or early.shape[0] < 2:
        raise MissingCycle(f"cycle {cycle_late} or {cycle_early} lacks a discharge curve")
    if grid is None:
        grid = _shared_grid(late, early, grid_points)
    stats = delta_q_stats(interp_qv(late, grid), interp_qv(early, grid))
    return dict(zip(_DQV_NAMES, stats))


def extract_r_dcir(
    cell: CellDataset, cycles: tuple[int, int] = (2, 102)
) -> dict[str, float]:
    """The 20 ``rdcir.*`` features: per-pulse DV / |I| for both diagnostics.

    Non-positive resistances are kept but flagged with a warning; they
    indicate noise exceeding the pulse IR drop.
    """
    out: dict[str, float] = {}
    for c in cycles:
        for p in segment_pulses(cell, c):
            r = p.resistance_ohm()
            if r <= 0:
                warnings.warn(
                    f"{cell.meta.cell_id} cycle {c} pulse {p.pulse_index}: R = {r:.3e} ohm",
                    NonPositiveResistanceWarning,
                    stacklevel=2,
                )
            out[f"rdcir.c{c}.p{p.pulse_index}"] = r
    return out


def extract_dq_dcir_features(
    cell: CellDataset,
    cycles: tuple[int, int] = (2, 102),
    pulse_grid_points: int = 100,
) -> dict[str, float]:
    """The 60 ``dqdcir.*`` features from per-pulse partial-curve differences.

    For each pulse index the partial discharge curves of the late and early
    diagnostic cycles are interpolated onto the intersection of their voltage
    spans and differenced (late - early).

    Raises EmptyOverlap when a pulse's two spans do not intersect.
    """
    early_c, late_c = cycles
    early = segment_pulses(cell, early_c)
    late = segment_pulses(cell, late_c)
    out: dict[str, float] = {}
    for pe, pl in zip(early, late):
        k = pe.pulse_index
        try:
            grid = _shared_grid(pl.partial_q, pe.partial_q, pulse_grid_points)
        except ValueError as exc:
            raise EmptyOverlap(f"pulse {k}: {exc}") from exc
        except EmptyOverlap as exc:
            raise EmptyOverlap(f"pulse {k}: {exc}") from exc
        stats = delta_q_stats(interp_qv(pl.partial_q, grid), interp_qv(pe.partial_q, grid))
        for s, val in zip(STAT_NAMES, stats):
            out[f"dqdcir.p{k}.{s}"] = val
    return out


def extract_fit_features(
    cell: CellDataset, c_start: int = 30, c_end: int = 99
) -> dict[str, float]:
    """Slope/intercept of discharge capacity vs. cycle over [c_start, c_end].

    Only regular (non-diagnostic) cycles participate. Raises InsufficientData
    with fewer than 2 qualifying summaries.
    """
    pts = [
        (s.cycle_index, s.discharge_capacity_ah)
        for s in cell.summaries
        if not s.is_diagnostic and c_start <= s.cycle_index <= c_end
    ]
    if len(pts) < 2:
        raise InsufficientData(
            f"need >= 2 regular cycles in [{c_start}, {c_end}], have {len(pts)}"
        )
    pts.sort()
    c = np.array([p[0] for p in pts], dtype=np.float64)
    q = np.array([p[1] for p in pts], dtype=np.float64)
    p1, p2 = np.polyfit(c, q, 1)
    return {"fit.p1": float(p1), "fit.p2": float(p2)}


def extract_all(cell: CellDataset, config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """All 88 features for one cell, in canonical order.

    Errors from the individual families are re-raised with the family name
    prefixed to the message.
    """
    present = set(int(c) for c in cell.records.cycles())
    needed = (
        config.cycle_early,
        config.dcir_cycle_early,
        config.cycle_late,
        config.dcir_cycle_late,
    )
    missing = [c for c in needed if c not in present]
    if missing:
        raise MissingCycle(f"{cell.meta.cell_id}: cycles {missing} absent from records")

    values: dict[str, float] = {}
    blocks = (
        ("dqv", lambda: extract_dqv_features(
            cell, config.cycle_late, config.cycle_early, grid_points=config.grid_points)),
        ("rdcir", lambda: extract_r_dcir(
            cell, (config.dcir_cycle_early, config.dcir_cycle_late))),
        ("dqdcir", lambda: extract_dq_dcir_features(
            cell, (config.dcir_cycle_early, config.dcir_cycle_late),
            config.pulse_grid_points)),
        ("fit", lambda: extract_fit_features(cell, config.fit_start, config.fit_end)),
    )
    for family, fn in blocks:
        try:
            values.update(fn())
        except PulselifeError as exc:
            raise type(exc)(f"{family}: {exc}") from exc
    ordered = {name: values[name] for name in FEATURE_NAMES}
    bad = [n for n, v in ordered.items() if not math.isfinite(v)]
    if bad:
        raise MissingCycle(f"{cell.meta.cell_id}: non-finite features {bad[:4]}")
    return FeatureVector(cell_id=cell.meta.cell_id, values=ordered)


@dataclass
class FeatureMatrix:
    """A stack of feature vectors: one row per cell, canonical column order."""

    cell_ids: list[str]
    feature_names: tuple[str, ...]
    X: np.ndarray = field(repr=False)

    @classmethod
    def from_vectors(cls, vectors: list[FeatureVector]) -> "FeatureMatrix":
        ids = [v.cell_id for v in vectors]
        X = np.vstack([v.as_array() for v in vectors]) if vectors else np.empty((0, len(FEATURE_NAMES)))
        return cls(ids, FEATURE_NAMES, X)

    def row(self, cell_id: str) -> FeatureVector:
        i = self.cell_ids.index(cell_id)
        return FeatureVector(cell_id, dict(zip(self.feature_names, self.X[i])))

    def columns(self, names: tuple[str, ...]) -> np.ndarray:
        idx = [self.feature_names.index(n) for n in names]
        return self.X[:, idx]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("cell_id",) + tuple(self.feature_names))
            for cid, row in zip(self.cell_ids, self.X):
                w.writerow((cid,) + tuple(repr(float(x)) for x in row))

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureMatrix":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            names = tuple(header[1:])
            ids: list[str] = []
            rows: list[list[float]] = []
            for row in reader:
                ids.append(row[0])
                rows.append([float(x) for x in row[1:]])
        X = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, len(names)))
        return cls(ids, names, X)
