"""Shared fixtures: simulated cells and fleets reused across test modules."""

import numpy as np
import pytest

from pulselife.datamodel import CellMeta
from pulselife.simulate import DegradationSpec, simulate_cell


def make_meta(cell_id="cell0", manufacturer="alpha", temp=23.0, v_min=2.5,
              v_max=4.2, nominal=5.0, group="alpha_23C_2.5-4.2V"):
    return CellMeta(
        cell_id=cell_id,
        manufacturer=manufacturer,
        temperature_c=temp,
        v_min=v_min,
        v_max=v_max,
        nominal_capacity_ah=nominal,
        group_id=group,
    )


@pytest.fixture(scope="session")
def meta0():
    return make_meta()


@pytest.fixture(scope="session")
def linear_cell(meta0):
    """Zero-noise cell: linear fade 1e-4/cycle, 0.2%/cycle resistance growth."""
    spec = DegradationSpec(fade_rate=1e-4, r_growth=0.002)
    return simulate_cell(meta0, spec, cycles=103)


@pytest.fixture(scope="session")
def zero_fade_cell(meta0):
    """No degradation at all: identical curves, constant resistance."""
    spec = DegradationSpec(fade_rate=0.0, r_growth=0.0)
    return simulate_cell(meta0, spec, cycles=103)


@pytest.fixture(scope="session")
def dcir_fleet():
    """27-cell fleet whose lifetime is planted in early resistance growth."""
    from pulselife.simulate import dcir_signal_plan, simulate_plan

    plan = dcir_signal_plan(seed=42)
    return simulate_plan(plan, cycles=103, thresholds=(0.85,))


@pytest.fixture(scope="session")
def dcir_features(dcir_fleet):
    from pulselife.features import FeatureMatrix, extract_all

    vectors = [extract_all(ds) for ds, _ in dcir_fleet]
    fm = FeatureMatrix.from_vectors(vectors)
    labels = {ds.meta.cell_id: truth[0.85].cycles_to_eol for ds, truth in dcir_fleet}
    metas = [ds.meta for ds, _ in dcir_fleet]
    return fm, labels, metas


def perturb_segment_capacity(cell, cycle, pulse_index, factor):
    """Scale the capacity of the discharge segment following one pulse."""
    from pulselife.datamodel import StepType
    from pulselife.ingest import CellDataset, CyclerRecords

    rec = cell.records
    idx = rec.cycle_indices(cycle)
    sub_steps = rec.step_index[idx]
    sub_types = rec.step_type[idx]
    pulse_steps = sorted(set(sub_steps[sub_types == StepType.PULSE_DISCHARGE].tolist()))
    target_pulse_step = pulse_steps[pulse_index]
    seg_steps = [s for s in sorted(set(sub_steps.tolist()))
                 if s > target_pulse_step
                 and (pulse_index + 1 >= len(pulse_steps) or s < pulse_steps[pulse_index + 1])]
    cap = rec.capacity_ah.copy()
    for s in seg_steps:
        m = np.zeros(len(rec), dtype=bool)
        m[idx] = (sub_steps == s) & (sub_types == StepType.CC_DISCHARGE)
        cap[m] = cap[m] * factor
    records = CyclerRecords(
        rec.cycle_index, rec.step_index, rec.step_type,
        rec.time_s, rec.current_a, rec.voltage_v, cap,
    )
    return CellDataset(meta=cell.meta, records=records, summaries=list(cell.summaries))
