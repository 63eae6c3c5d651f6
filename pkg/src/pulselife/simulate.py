"""Synthetic cell fleets with planted degradation for ground-truth testing.

The simulator emits the standard cycling protocol: a low-rate diagnostic pair
every 100 cycles starting at cycle 1 (a plain low-rate cycle followed by a
pulsed one carrying 10 DCIR pulses at 10% SOC steps), with full-rate cycles
in between (constant-current charge, constant-voltage hold to a C/20 cutoff,
constant-current discharge).

Voltage model: V = OCV(soc) + I * r(soc, cycle), IR polarization only. During
the 10-second pulses the OCV term is frozen at the pulse-entry SOC (the SOC
decrement is applied at pulse exit), so the measured (v_before - v_end) / |I|
recovers the planted pulse resistance exactly at zero noise. Full discharges
deliver exactly the faded capacity, independent of rate apart from a
configurable low-rate bonus; the terminal CV sample carries the remaining
charge capacity so per-cycle bookkeeping stays exact.

This is an oracle generator, not a digital twin: no RC transients, no thermal
dynamics, no electrochemistry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .datamodel import CellMeta, CycleSummary, EolLabel, StepType
from .errors import SpecError
from .ingest import CellDataset, CyclerRecords

__all__ = [
    "MonotoneCubic",
    "DegradationSpec",
    "ManufacturerSpec",
    "FleetSpec",
    "simulate_cell",
    "simulate_fleet",
    "simulate_plan",
    "paper_shaped_plan",
    "dcir_signal_plan",
    "DEFAULT_THRESHOLDS",
]

DEFAULT_THRESHOLDS = (0.90, 0.85, 0.80)

# open-circuit-voltage shape: (soc, fraction of the cell's voltage window)
DEFAULT_OCV_ANCHORS = (
    (0.0, 0.0),
    (0.08, 0.14),
    (0.25, 0.34),
    (0.50, 0.55),
    (0.75, 0.74),
    (0.92, 0.89),
    (1.0, 1.0),
)


class MonotoneCubic:
    """Shape-preserving cubic Hermite interpolant through increasing anchors."""

    def __init__(self, x: np.ndarray, y: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
            raise ValueError("x must be strictly increasing with >= 2 points")
        if np.any(np.diff(y) <= 0):
            raise ValueError("y must be strictly increasing")
        h = np.diff(x)
        delta = np.diff(y) / h
        m = np.empty_like(x)
        # interior slopes: weighted harmonic mean, zero at local extrema
        w1 = 2 * h[1:] + h[:-1]
        w2 = h[1:] + 2 * h[:-1]
        m[1:-1] = (w1 + w2) / (w1 / delta[:-1] + w2 / delta[1:])
        m[0] = _edge_slope(h[0], h[1], delta[0], delta[1]) if x.size > 2 else delta[0]
        m[-1] = _edge_slope(h[-1], h[-2], delta[-1], delta[-2]) if x.size > 2 else delta[-1]
        self.x, self.y, self.m = x, y, m

    def __call__(self, xq: np.ndarray | float) -> np.ndarray | float:
        scalar = np.isscalar(xq)
        xq_arr = np.atleast_1d(np.asarray(xq, dtype=np.float64))
        xq_arr = np.clip(xq_arr, self.x[0], self.x[-1])
        i = np.clip(np.searchsorted(self.x, xq_arr, side="right") - 1, 0, self.x.size - 2)
        h = self.x[i + 1] - self.x[i]
        t = (xq_arr - self.x[i]) / h
        t2 = t * t
        t3 = t2 * t
        out = (
            (2 * t3 - 3 * t2 + 1) * self.y[i]
            + (t3 - 2 * t2 + t) * h * self.m[i]
            + (-2 * t3 + 3 * t2) * self.y[i + 1]
            + (t3 - t2) * h * self.m[i + 1]
        )
        return float(out[0]) if scalar else out

    def inverse(self, yq: float) -> float:
        """Bisection inverse; valid because the interpolant is increasing."""
        lo, hi = self.x[0], self.x[-1]
        if yq <= self.y[0]:
            return float(lo)
        if yq >= self.y[-1]:
            return float(hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if self(mid) < yq:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def _edge_slope(h0: float, h1: float, d0: float, d1: float) -> float:
    s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if s <= 0:
        return 0.0
    if s > 3 * d0:
        return 3 * d0
    return s


def _softplus(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


@dataclass(frozen=True)
class DegradationSpec:
    """Planted degradation and protocol sampling for one cell.

    fade profiles (soh as a function of cycle, soh(0) = 1):
      linear:       1 - fade_rate * c
      sublinear:    1 - fade_rate * c ** fade_power
      superlinear:  two slopes (fade_rate, then knee_rate) blended smoothly
                    over knee_width cycles around knee_cycle

    The pulse resistance is r0_ohm * (1 + r_soc_gain * k / 9) at pulse k,
    growing by the per-cycle fraction r_growth (scalar, or one value per
    pulse index).
    """

    fade_profile: str = "linear"
    fade_rate: float = 1e-4
    fade_power: float = 0.75
    knee_cycle: float = 800.0
    knee_width: float = 20.0
    knee_rate: float = 8e-4
    r0_ohm: float = 0.015
    r_soc_gain: float = 0.4
    r_growth: float | tuple[float, ...] = 0.0
    ocv_anchors: tuple[tuple[float, float], ...] = DEFAULT_OCV_ANCHORS
    noise_sigma_v: float = 0.0
    seed: int = 0
    diag_capacity_gain: float = 0.02
    sample_cc_s: float = 30.0
    sample_pulse_s: float = 1.0
    sample_rest_s: float = 60.0
    sample_cv_s: float = 30.0
    pulse_duration_s: float = 10.0
    rest_duration_s: float = 900.0

    def __post_init__(self) -> None:
        if self.fade_profile not in ("linear", "sublinear", "superlinear"):
            raise SpecError(f"unknown fade_profile {self.fade_profile!r}")
        if self.r0_ohm <= 0:
            raise SpecError("r0_ohm must be positive")
        if self.fade_profile == "superlinear" and self.knee_width <= 0:
            raise SpecError("knee_width must be positive")
        for name in ("sample_cc_s", "sample_pulse_s", "sample_rest_s", "sample_cv_s",
                     "pulse_duration_s", "rest_duration_s"):
            if getattr(self, name) <= 0:
                raise SpecError(f"{name} must be positive")
        if isinstance(self.r_growth, tuple) and len(self.r_growth) != 10:
            raise SpecError("per-pulse r_growth needs exactly 10 values")
        if self.noise_sigma_v < 0:
            raise SpecError("noise_sigma_v must be >= 0")

    def soh(self, cycle: np.ndarray | float) -> np.ndarray | float:
        c = np.asarray(cycle, dtype=np.float64)
        if self.fade_profile == "linear":
            out = 1.0 - self.fade_rate * c
        elif self.fade_profile == "sublinear":
            out = 1.0 - self.fade_rate * np.power(np.maximum(c, 0.0), self.fade_power)
        else:
            w = self.knee_width
            extra = (self.knee_rate - self.fade_rate) * w * _softplus((c - self.knee_cycle) / w)
            out = 1.0 - self.fade_rate * c - extra
        return float(out) if np.isscalar(cycle) else out

    def eol_crossing(self, threshold: float) -> float | None:
        """Cycle at which the planted soh curve reaches the threshold, or None."""
        if not 0.0 < threshold < 1.0:
            raise SpecError(f"threshold must be in (0, 1), got {threshold}")
        if self.fade_profile == "linear":
            if self.fade_rate <= 0:
                return None
            return (1.0 - threshold) / self.fade_rate
        if self.fade_profile == "sublinear":
            if self.fade_rate <= 0:
                return None
            return ((1.0 - threshold) / self.fade_rate) ** (1.0 / self.fade_power)
        hi = 1000.0
        while self.soh(hi) > threshold:
            hi *= 2.0
            if hi > 1e9:
                return None
        lo = 0.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if self.soh(mid) > threshold:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def growth_at(self, k: int) -> float:
        if isinstance(self.r_growth, tuple):
            return float(self.r_growth[k])
        return float(self.r_growth)

    def r_pulse(self, k: int, cycle: float) -> float:
        """Planted effective resistance of pulse k at a given cycle."""
        base = self.r0_ohm * (1.0 + self.r_soc_gain * k / 9.0)
        return base * (1.0 + self.growth_at(k) * cycle)

    def r_at_soc(self, soc: np.ndarray, cycle: float) -> np.ndarray:
        """Resistance interpolated across SOC from the 10 pulse checkpoints."""
        socs = 1.0 - 0.1 * np.arange(10)  # descending
        rs = np.array([self.r_pulse(k, cycle) for k in range(10)])
        return np.interp(np.asarray(soc, dtype=np.float64), socs[::-1], rs[::-1])

    def ocv(self, v_min: float, v_max: float) -> MonotoneCubic:
        soc = np.array([a[0] for a in self.ocv_anchors])
        frac = np.array([a[1] for a in self.ocv_anchors])
        return MonotoneCubic(soc, v_min + frac * (v_max - v_min))


def _is_diag(cycle: int) -> bool:
    return (cycle - 1) % 100 < 2


def _is_pulse_cycle(cycle: int) -> bool:
    return (cycle - 2) % 100 == 0


class _RecordBuilder:
    """Accumulates step samples into record columns with a global clock."""

    def __init__(self) -> None:
        self.cols: list[list[np.ndarray]] = [[], [], [], [], [], [], []]
        self.clock = 0.0
        self.cycle = 0
        self.step = 0

    def start_cycle(self, cycle: int) -> None:
        self.cycle = cycle
        self.step = 0

    def add(self, step_type: StepType, t_rel: np.ndarray, i: np.ndarray,
            v: np.ndarray, q: np.ndarray) -> None:
        n = t_rel.size
        c = self.cols
        c[0].append(np.full(n, self.cycle, dtype=np.int64))
        c[1].append(np.full(n, self.step, dtype=np.int64))
        c[2].append(np.full(n, int(step_type), dtype=np.int8))
        c[3].append(self.clock + t_rel)
        c[4].append(np.asarray(i, dtype=np.float64))
        c[5].append(np.asarray(v, dtype=np.float64))
        c[6].append(np.asarray(q, dtype=np.float64))
        self.clock += float(t_rel[-1])
        self.step += 1

    def build(self) -> CyclerRecords:
        if not self.cols[0]:
            empty = np.empty(0)
            return CyclerRecords(empty, empty, empty, empty, empty, empty, empty)
        return CyclerRecords(*(np.concatenate(col) for col in self.cols))


def _times(duration: float, dt: float) -> np.ndarray:
    if duration <= dt:
        return np.array([0.0, duration])
    t = np.arange(0.0, duration, dt)
    if duration - t[-1] > 1e-9:
        t = np.append(t, duration)
    else:
        t[-1] = duration
    return t


class _CellSim:
    def __init__(self, meta: CellMeta, spec: DegradationSpec, cycles: int,
                 record_cycles: int | None):
        self.meta = meta
        self.spec = spec
        self.cycles = cycles
        self.record_cycles = cycles if record_cycles is None else record_cycles
        self.ocv = spec.ocv(meta.v_min, meta.v_max)
        self.rng = np.random.default_rng(spec.seed)
        self.builder = _RecordBuilder()
        self.i_1c = meta.nominal_capacity_ah

    def _noisy(self, v: np.ndarray) -> np.ndarray:
        if self.spec.noise_sigma_v > 0:
            return v + self.rng.normal(0.0, self.spec.noise_sigma_v, v.shape)
        return v

    def q_delivered(self, cycle: int) -> float:
        gain = self.spec.diag_capacity_gain if _is_diag(cycle) else 0.0
        return self.meta.nominal_capacity_ah * float(self.spec.soh(cycle)) * (1.0 + gain)

    # ---- step emitters ----------------------------------------------------

    def _cc(self, step_type: StepType, cycle: int, qdel: float, theta0: float,
            theta1: float, i_signed: float) -> float:
        q_total = abs(theta1 - theta0) * qdel
        dur = q_total / abs(i_signed) * 3600.0
        t = _times(dur, self.spec.sample_cc_s)
        q = abs(i_signed) * t / 3600.0
        q[-1] = q_total
        sign = 1.0 if theta1 > theta0 else -1.0
        theta = theta0 + sign * q / qdel
        theta[-1] = theta1
        v = self.ocv(theta) + i_signed * self.spec.r_at_soc(theta, cycle)
        self.builder.add(step_type, t, np.full(t.size, i_signed), self._noisy(v), q)
        return theta1

    def _cv(self, cycle: int, qdel: float, theta_cv: float, i_cc: float) -> float:
        q_cv = (1.0 - theta_cv) * qdel
        i_cut = self.meta.nominal_capacity_ah / 20.0
        if q_cv <= 0 or i_cc <= i_cut:
            return 1.0
        tau = q_cv * 3600.0 / i_cc
        dur = tau * math.log(i_cc / i_cut)
        t = _times(dur, self.spec.sample_cv_s)
        i = i_cc * np.exp(-t / tau)
        q = i_cc * tau * (1.0 - np.exp(-t / tau)) / 3600.0
        q[-1] = q_cv  # terminal sample carries the untracked tail
        v = np.full(t.size, self.meta.v_max)
        self.builder.add(StepType.CV_HOLD, t, i, self._noisy(v), q)
        return 1.0

    def _rest(self, theta: float) -> None:
        t = _times(self.spec.rest_duration_s, self.spec.sample_rest_s)
        v = np.full(t.size, float(self.ocv(theta)))
        self.builder.add(StepType.REST, t, np.zeros(t.size), self._noisy(v), np.zeros(t.size))

    def _pulse(self, cycle: int, qdel: float, theta: float, k: int) -> float:
        t = _times(self.spec.pulse_duration_s, self.spec.sample_pulse_s)
        i = -self.i_1c
        # OCV frozen at pulse entry: IR-only drop, SOC decrement applied at exit
        v = np.full(t.size, float(self.ocv(theta)) + i * self.spec.r_pulse(k, cycle))
        q = self.i_1c * t / 3600.0
        self.builder.add(StepType.PULSE_DISCHARGE, t, np.full(t.size, i), self._noisy(v), q)
        return theta - q[-1] / qdel

    def _charge(self, cycle: int, qdel: float, i_chg: float) -> None:
        # CC to the voltage where OCV + I*R hits v_max, then CV to full
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            v = float(self.ocv(mid)) + i_chg * float(self.spec.r_at_soc(np.array([mid]), cycle)[0])
            if v < self.meta.v_max:
                lo = mid
            else:
                hi = mid
        theta_cv = 0.5 * (lo + hi)
        self._cc(StepType.CC_CHARGE, cycle, qdel, 0.0, theta_cv, i_chg)
        self._cv(cycle, qdel, theta_cv, i_chg)

    # ---- cycle emitters ---------------------------------------------------

    def _plain_cycle(self, cycle: int, i_rate: float) -> None:
        qdel = self.q_delivered(cycle)
        self._charge(cycle, qdel, i_rate)
        self._cc(StepType.CC_DISCHARGE, cycle, qdel, 1.0, 0.0, -i_rate)

    def _pulsed_cycle(self, cycle: int) -> None:
        qdel = self.q_delivered(cycle)
        i_c10 = self.i_1c / 10.0
        self._charge(cycle, qdel, i_c10)
        theta = 1.0
        for k in range(10):
            self._rest(theta)
            theta = self._pulse(cycle, qdel, theta, k)
            target = 1.0 - 0.1 * (k + 1) if k < 9 else 0.0
            theta = self._cc(StepType.CC_DISCHARGE, cycle, qdel, theta, target, -i_c10)

    def run(self) -> CellDataset:
        summaries = []
        for cycle in range(1, self.cycles + 1):
            qdel = self.q_delivered(cycle)
            if cycle <= self.record_cycles:
                self.builder.start_cycle(cycle)
                if _is_pulse_cycle(cycle):
                    self._pulsed_cycle(cycle)
                elif _is_diag(cycle):
                    self._plain_cycle(cycle, self.i_1c / 10.0)
                else:
                    self._plain_cycle(cycle, self.i_1c / 3.0)
            summaries.append(CycleSummary(cycle, qdel, qdel, _is_diag(cycle)))
        return CellDataset(meta=self.meta, records=self.builder.build(), summaries=summaries)


def simulate_cell(
    meta: CellMeta,
    spec: DegradationSpec,
    cycles: int = 103,
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
    record_cycles: int | None = None,
) -> tuple[CellDataset, dict[float, EolLabel | None]]:
    """One synthetic cell plus its planted end-of-life labels.

    ``record_cycles`` caps the cycles that keep full time-series records;
    summaries always cover all ``cycles``. Ground-truth labels come from the
    closed form of the fade curve; a label is None when the curve never
    reaches the threshold, and flagged extrapolated when the crossing lies
    beyond the simulated cycle count.
    """
    if cycles < 102:
        raise SpecError(f"need cycles >= 102 for the second diagnostic, got {cycles}")
    if record_cycles is not None and record_cycles < 0:
        raise SpecError("record_cycles must be >= 0")
    dataset = _CellSim(meta, spec, cycles, record_cycles).run()
    truth: dict[float, EolLabel | None] = {}
    for t in thresholds:
        crossing = spec.eol_crossing(t)
        truth[t] = None if crossing is None else EolLabel(t, crossing, crossing > cycles)
    return dataset, truth


# --------------------------------------------------------------------------
# fleets


@dataclass(frozen=True)
class ManufacturerSpec:
    name: str
    nominal_capacity_ah: float
    base: DegradationSpec


@dataclass(frozen=True)
class FleetSpec:
    """Full-factorial fleet: every manufacturer x condition x replicate."""

    manufacturers: tuple[ManufacturerSpec, ...]
    conditions: tuple[tuple[float, float, float], ...]  # (temp_c, v_min, v_max)
    replicates: int = 3
    cycles: int = 103
    seed: int = 0
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    rate_jitter: float = 0.03
    r0_jitter: float = 0.02
    temp_fade_coeff: float = 0.02
    vwin_fade_coeff: float = 0.4
    record_cycles: int | None = None

    def __post_init__(self) -> None:
        if not self.manufacturers or not self.conditions:
            raise SpecError("need at least one manufacturer and one condition")
        if self.replicates < 1:
            raise SpecError("replicates must be >= 1")
        if self.cycles < 102:
            raise SpecError("cycles must be >= 102")

    def _condition_multiplier(self, temp_c: float, v_min: float, v_max: float) -> float:
        smallest = min(c[2] - c[1] for c in self.conditions)
        mult = (1.0 + self.temp_fade_coeff * (temp_c - 23.0)) * (
            1.0 + self.vwin_fade_coeff * ((v_max - v_min) - smallest)
        )
        return max(mult, 0.1)

    def cell_plan(self) -> list[tuple[CellMeta, DegradationSpec]]:
        plan: list[tuple[CellMeta, DegradationSpec]] = []
        idx = 0
        for m in self.manufacturers:
            for temp_c, v_min, v_max in self.conditions:
                group = _group_id(m.name, temp_c, v_min, v_max)
                for rep in range(1, self.replicates + 1):
                    meta = CellMeta(
                        cell_id=f"{group}_r{rep}",
                        manufacturer=m.name,
                        temperature_c=temp_c,
                        v_min=v_min,
                        v_max=v_max,
                        nominal_capacity_ah=m.nominal_capacity_ah,
                        group_id=group,
                    )
                    rng = np.random.default_rng([self.seed, idx])
                    mult = self._condition_multiplier(temp_c, v_min, v_max)
                    fade = m.base.fade_rate * mult * (1.0 + self.rate_jitter * rng.standard_normal())
                    knee_rate = m.base.knee_rate * mult * (1.0 + self.rate_jitter * rng.standard_normal())
                    r0 = m.base.r0_ohm * (1.0 + self.r0_jitter * rng.standard_normal())
                    spec = replace(
                        m.base,
                        fade_rate=max(fade, 1e-7),
                        knee_rate=max(knee_rate, 1e-7),
                        r0_ohm=max(r0, 1e-4),
                        seed=int(rng.integers(2**31)),
                    )
                    plan.append((meta, spec))
                    idx += 1
        return plan


def _group_id(name: str, temp_c: float, v_min: float, v_max: float) -> str:
    return f"{name}_{temp_c:g}C_{v_min:g}-{v_max:g}V"


def simulate_plan(
    plan: list[tuple[CellMeta, DegradationSpec]],
    cycles: int,
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
    record_cycles: int | None = None,
) -> list[tuple[CellDataset, dict[float, EolLabel | None]]]:
    return [
        simulate_cell(meta, spec, cycles, thresholds, record_cycles)
        for meta, spec in plan
    ]


def simulate_fleet(spec: FleetSpec) -> list[tuple[CellDataset, dict[float, EolLabel | None]]]:
    """Deterministic fleet simulation; same seed, same datasets."""
    return simulate_plan(spec.cell_plan(), spec.cycles, spec.thresholds, spec.record_cycles)


# --------------------------------------------------------------------------
# reference fleet layouts


_PAPER_CONDITIONS = (
    (23.0, 2.5, 4.06),
    (23.0, 2.5, 4.2),
    (23.0, 3.3, 4.2),
    (40.0, 2.5, 4.06),
    (40.0, 2.5, 4.2),
    (40.0, 3.3, 4.2),
    (60.0, 2.5, 4.2),
)


def paper_shaped_plan(
    seed: int = 0,
    omissions: bool = True,
    **spec_overrides,
) -> list[tuple[CellMeta, DegradationSpec]]:
    """The 19-sample triplicate design: 3 manufacturers, 7 conditions.

    Two manufacturers run all 7 conditions; the third skips the narrow
    3.3-4.2 V window, giving 19 unique (manufacturer, condition) samples and
    57 cells. With ``omissions`` the 5 early-failure cells are dropped
    (52 cells remain) and two cells of one triplicate get a non-degrading
    profile, so they carry no end-of-life label at any threshold. Extra
    keyword arguments override DegradationSpec fields on every cell (e.g.
    coarser sampling for quick fixtures).
    """
    mfrs = {
        "alpha": ManufacturerSpec(
            "alpha", 5.0, DegradationSpec(fade_profile="linear", fade_rate=1.0e-4, r0_ohm=0.014)
        ),
        "bravo": ManufacturerSpec(
            "bravo", 4.8, DegradationSpec(
                fade_profile="superlinear", fade_rate=5.0e-5, knee_cycle=700.0,
                knee_width=30.0, knee_rate=4.0e-4, r0_ohm=0.017,
            )
        ),
        "charlie": ManufacturerSpec(
            "charlie", 3.0, DegradationSpec(
                fade_profile="sublinear", fade_rate=8.0e-4, fade_power=0.75, r0_ohm=0.022,
            )
        ),
    }
    participation = {
        "alpha": _PAPER_CONDITIONS,
        "bravo": _PAPER_CONDITIONS,
        "charlie": tuple(c for c in _PAPER_CONDITIONS if not (c[1] == 3.3)),
    }
    omitted = {
        ("alpha", (23.0, 3.3, 4.2), 1),
        ("bravo", (23.0, 2.5, 4.06), 1),
        ("bravo", (60.0, 2.5, 4.2), 1),
        ("bravo", (60.0, 2.5, 4.2), 2),
        ("bravo", (60.0, 2.5, 4.2), 3),
    }
    never_degrading = {
        ("charlie", (23.0, 2.5, 4.06), 1),
        ("charlie", (23.0, 2.5, 4.06), 2),
    }
    base_fleet = FleetSpec(
        manufacturers=tuple(mfrs.values()), conditions=_PAPER_CONDITIONS, seed=seed
    )
    plan: list[tuple[CellMeta, DegradationSpec]] = []
    idx = 0
    for name, m in mfrs.items():
        for cond in participation[name]:
            temp_c, v_min, v_max = cond
            group = _group_id(name, temp_c, v_min, v_max)
            for rep in range(1, 4):
                idx += 1
                if omissions and (name, cond, rep) in omitted:
                    continue
                meta = CellMeta(
                    cell_id=f"{group}_r{rep}",
                    manufacturer=name,
                    temperature_c=temp_c,
                    v_min=v_min,
                    v_max=v_max,
                    nominal_capacity_ah=m.nominal_capacity_ah,
                    group_id=group,
                )
                rng = np.random.default_rng([seed, idx])
                mult = base_fleet._condition_multiplier(temp_c, v_min, v_max)
                spec = replace(
                    m.base,
                    fade_rate=max(m.base.fade_rate * mult * (1.0 + 0.03 * rng.standard_normal()), 1e-7),
                    knee_rate=max(m.base.knee_rate * mult * (1.0 + 0.03 * rng.standard_normal()), 1e-7),
                    r0_ohm=max(m.base.r0_ohm * (1.0 + 0.02 * rng.standard_normal()), 1e-4),
                    seed=int(rng.integers(2**31)),
                )
                if omissions and (name, cond, rep) in never_degrading:
                    # capacity creeps up instead of fading: no label at any threshold
                    spec = replace(spec, fade_profile="linear", fade_rate=-1.0e-6)
                if spec_overrides:
                    spec = replace(spec, **spec_overrides)
                plan.append((meta, spec))
    return plan


def dcir_signal_plan(
    seed: int = 0,
    replicates: int = 3,
    eol_range: tuple[float, float] = (800.0, 2000.0),
    threshold_ref: float = 0.85,
    noise_sigma_v: float = 1e-3,
) -> list[tuple[CellMeta, DegradationSpec]]:
    """Fleet whose lifetime is a planted function of early resistance growth.

    All cells share an essentially flat early fade (slope jitter is
    independent of lifetime), then hit a knee just past the feature window
    whose steepness realizes a target end-of-life drawn per cell. The pulse
    resistance growth rate is an affine function of that target and identical
    in form across manufacturers, so resistance features carry the signal
    while full-curve capacity features carry none of it.
    """
    lo, hi = eol_range
    if not 0 < lo < hi:
        raise SpecError("eol_range must be increasing and positive")
    knee, width = 115.0, 12.0
    g_min, g_max = 0.001, 0.008
    mfrs = (("alpha", 5.0), ("bravo", 4.8), ("charlie", 3.0))
    conditions = ((23.0, 2.5, 4.2), (40.0, 2.5, 4.2), (23.0, 3.3, 4.2))
    # manufacturer-specific OCV shapes keep capacity features clustered by maker
    anchor_sets = {
        "alpha": DEFAULT_OCV_ANCHORS,
        "bravo": ((0.0, 0.0), (0.08, 0.10), (0.25, 0.30), (0.5, 0.52),
                  (0.75, 0.72), (0.92, 0.88), (1.0, 1.0)),
        "charlie": ((0.0, 0.0), (0.08, 0.18), (0.25, 0.40), (0.5, 0.60),
                    (0.75, 0.78), (0.92, 0.91), (1.0, 1.0)),
    }
    plan: list[tuple[CellMeta, DegradationSpec]] = []
    idx = 0
    for name, nominal in mfrs:
        for temp_c, v_min, v_max in conditions:
            group = _group_id(name, temp_c, v_min, v_max)
            for rep in range(1, replicates + 1):
                rng = np.random.default_rng([seed, 7, idx])
                u = float(rng.uniform())
                target = lo + (hi - lo) * u
                s1 = 5.0e-5 * (1.0 + 0.2 * float(rng.standard_normal()))
                s2 = (1.0 - threshold_ref - s1 * knee) / (target - knee)
                growth = g_min + (g_max - g_min) * (hi - target) / (hi - lo)
                meta = CellMeta(
                    cell_id=f"{group}_r{rep}",
                    manufacturer=name,
                    temperature_c=temp_c,
                    v_min=v_min,
                    v_max=v_max,
                    nominal_capacity_ah=nominal,
                    group_id=group,
                )
                spec = DegradationSpec(
                    fade_profile="superlinear",
                    fade_rate=s1,
                    knee_cycle=knee,
                    knee_width=width,
                    knee_rate=s2,
                    r0_ohm=0.018,
                    r_soc_gain=0.3,
                    r_growth=growth,
                    ocv_anchors=anchor_sets[name],
                    noise_sigma_v=noise_sigma_v,
                    seed=int(rng.integers(2**31)),
                )
                plan.append((meta, spec))
                idx += 1
    return plan
