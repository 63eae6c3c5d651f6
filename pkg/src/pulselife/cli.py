"""Command-line front end: simulate, ingest-check, features, evaluate, explain, report.

All commands read a JSON run config (``--config``); command-line flags
override config keys of the same name. Every command echoes the resolved
config into its output directory so a run can be reproduced exactly, logs
line-oriented progress to stderr, and exits nonzero only for errors that are
not per-cell exclusions.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datamodel import SohReference, label_eol
from .errors import InsufficientData, NonDecaying, PulselifeError
from .evaluate import CvScheme, emit_parity, run_cv, save_report
from .explain import kernel_shap, shap_summary
from .features import (
    FEATURE_FAMILIES,
    FeatureConfig,
    FeatureMatrix,
    extract_all,
)
from .ingest import parse_cell, read_cell_meta, write_cell
from .model import (
    DEFAULT_SFS_TARGETS,
    HyperGrid,
    load_model,
    pipeline_fit,
    save_model,
)
from .simulate import (
    DegradationSpec,
    FleetSpec,
    ManufacturerSpec,
    dcir_signal_plan,
    paper_shaped_plan,
    simulate_cell,
)

log = logging.getLogger("pulselife")

_DEFAULT_FAMILIES = ("dqv_only", "dqv_plus_fit", "dq_dcir", "dcir_all", "all")


@dataclass(frozen=True)
class RunConfig:
    data_dir: str = "data"
    output_dir: str = "out"
    soh_thresholds: tuple[float, ...] = (0.90, 0.85, 0.80)
    soh_reference: str = "first_regular"
    scheme: CvScheme = field(default_factory=lambda: CvScheme("loto"))
    feature_family_set: tuple[str, ...] = _DEFAULT_FAMILIES
    lambdas: tuple[float, ...] | None = None
    alphas: tuple[float, ...] | None = None
    inner_folds: int = 3
    sfs_targets: dict | None = None
    grid_points: int = 1000
    extrapolation_window: int = 100
    seed: int = 0
    jobs: int = 1

    def __post_init__(self) -> None:
        t = self.soh_thresholds
        if any(not 0 < x < 1 for x in t) or any(a <= b for a, b in zip(t, t[1:])):
            raise ValueError("soh_thresholds must be strictly decreasing fractions in (0,1)")
        unknown = [f for f in self.feature_family_set if f not in FEATURE_FAMILIES]
        if unknown:
            raise ValueError(f"unknown feature families {unknown}")

    def hyper_grid(self) -> HyperGrid:
        kw = {"inner_folds": self.inner_folds}
        if self.lambdas:
            kw["lambdas"] = tuple(float(x) for x in self.lambdas)
        if self.alphas:
            kw["alphas"] = tuple(float(x) for x in self.alphas)
        return HyperGrid(**kw)

    def sfs_target_for(self, kind: str) -> int:
        table = dict(DEFAULT_SFS_TARGETS)
        if self.sfs_targets:
            table.update({k: int(v) for k, v in self.sfs_targets.items()})
        return table[kind]


def _load_config(path: str | None, overrides: dict) -> RunConfig:
    raw: dict = {}
    if path:
        with open(path) as fh:
            raw = json.load(fh)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    scheme_raw = raw.get("scheme", {"kind": "loto"})
    if isinstance(scheme_raw, str):
        scheme_raw = {"kind": scheme_raw}
    fams = raw.get("feature_family_set", _DEFAULT_FAMILIES)
    if isinstance(fams, str):
        fams = (fams,)
    return RunConfig(
        data_dir=str(raw.get("data_dir", "data")),
        output_dir=str(raw.get("output_dir", "out")),
        soh_thresholds=tuple(float(x) for x in raw.get("soh_thresholds", (0.90, 0.85, 0.80))),
        soh_reference=str(raw.get("soh_reference", "first_regular")),
        scheme=CvScheme(
            kind=scheme_raw.get("kind", "loto"),
            k=int(scheme_raw.get("k", 5)),
            seed=int(scheme_raw.get("seed", raw.get("seed", 0))),
        ),
        feature_family_set=tuple(fams),
        lambdas=tuple(raw["lambdas"]) if "lambdas" in raw else None,
        alphas=tuple(raw["alphas"]) if "alphas" in raw else None,
        inner_folds=int(raw.get("inner_folds", 3)),
        sfs_targets=raw.get("sfs_targets"),
        grid_points=int(raw.get("grid_points", 1000)),
        extrapolation_window=int(raw.get("extrapolation_window", 100)),
        seed=int(raw.get("seed", 0)),
        jobs=int(raw.get("jobs", 1)),
    )


def _echo_config(cfg: RunConfig, out_dir: Path) -> None:
    doc = {
        "data_dir": cfg.data_dir,
        "output_dir": cfg.output_dir,
        "soh_thresholds": list(cfg.soh_thresholds),
        "soh_reference": cfg.soh_reference,
        "scheme": {"kind": cfg.scheme.kind, "k": cfg.scheme.k, "seed": cfg.scheme.seed},
        "feature_family_set": list(cfg.feature_family_set),
        "lambdas": list(cfg.lambdas) if cfg.lambdas else None,
        "alphas": list(cfg.alphas) if cfg.alphas else None,
        "inner_folds": cfg.inner_folds,
        "sfs_targets": cfg.sfs_targets,
        "grid_points": cfg.grid_points,
        "extrapolation_window": cfg.extrapolation_window,
        "seed": cfg.seed,
        "jobs": cfg.jobs,
    }
    with open(out_dir / "run_config.json", "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _pct(threshold: float) -> int:
    return int(round(threshold * 100))


# --------------------------------------------------------------------------
# simulate


def _plan_from_fleet_spec(doc: dict, seed: int):
    layout = doc.get("layout", "factorial")
    cycles = int(doc.get("cycles", 103))
    thresholds = tuple(float(t) for t in doc.get("thresholds", (0.90, 0.85, 0.80)))
    record_cycles = doc.get("record_cycles")
    record_cycles = int(record_cycles) if record_cycles is not None else None
    if layout == "paper_shaped":
        plan = paper_shaped_plan(seed=seed, omissions=bool(doc.get("omissions", True)))
    elif layout == "dcir_signal":
        plan = dcir_signal_plan(
            seed=seed,
            replicates=int(doc.get("replicates", 3)),
            eol_range=tuple(doc.get("eol_range", (800.0, 2000.0))),
        )
    elif layout == "factorial":
        mfrs = tuple(
            ManufacturerSpec(
                name=m["name"],
                nominal_capacity_ah=float(m["nominal_capacity_ah"]),
                base=DegradationSpec(**m.get("degradation", {})),
            )
            for m in doc["manufacturers"]
        )
        conditions = tuple(tuple(float(x) for x in c) for c in doc["conditions"])
        fleet = FleetSpec(
            manufacturers=mfrs,
            conditions=conditions,
            replicates=int(doc.get("replicates", 3)),
            cycles=cycles,
            seed=seed,
            thresholds=thresholds,
            record_cycles=record_cycles,
        )
        plan = fleet.cell_plan()
    else:
        raise ValueError(f"unknown fleet layout {layout!r}")
    return plan, cycles, thresholds, record_cycles


def cmd_simulate(cfg: RunConfig, fleet_spec_path: str) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, out)
    with open(fleet_spec_path) as fh:
        doc = json.load(fh)
    plan, cycles, thresholds, record_cycles = _plan_from_fleet_spec(doc, cfg.seed)
    manifest_cells = []
    for meta, spec in plan:
        dataset, truth = simulate_cell(meta, spec, cycles, thresholds, record_cycles)
        ts = f"{meta.cell_id}.csv"
        mj = f"{meta.cell_id}.json"
        sm = f"{meta.cell_id}_summary.csv"
        write_cell(dataset, out / ts, out / mj, out / sm)
        manifest_cells.append(
            {
                "cell_id": meta.cell_id,
                "group_id": meta.group_id,
                "manufacturer": meta.manufacturer,
                "timeseries": ts,
                "meta": mj,
                "summary": sm,
                "ground_truth": {
                    f"{_pct(t)}": (
                        None
                        if lbl is None
                        else {"cycles_to_eol": lbl.cycles_to_eol, "extrapolated": lbl.extrapolated}
                    )
                    for t, lbl in truth.items()
                },
            }
        )
        log.info("simulated %s (%d records)", meta.cell_id, len(dataset.records))
    with open(out / "manifest.json", "w") as fh:
        json.dump({"seed": cfg.seed, "cycles": cycles, "cells": manifest_cells}, fh, indent=1)
        fh.write("\n")
    log.info("wrote %d cells + manifest to %s", len(manifest_cells), out)
    return 0


# --------------------------------------------------------------------------
# ingestion helpers


def _discover_cells(data_dir: Path) -> list[tuple[str, Path, Path, Path | None]]:
    """(cell_id, timeseries, meta, summary) tuples from a manifest or glob."""
    manifest = data_dir / "manifest.json"
    out = []
    if manifest.exists():
        with open(manifest) as fh:
            doc = json.load(fh)
        for c in doc["cells"]:
            summary = data_dir / c["summary"] if c.get("summary") else None
            out.append((c["cell_id"], data_dir / c["timeseries"], data_dir / c["meta"], summary))
        return out
    for meta_path in sorted(data_dir.glob("*.json")):
        if meta_path.name in {"manifest.json", "run_config.json"}:
            continue
        stem = meta_path.stem
        ts = data_dir / f"{stem}.csv"
        if not ts.exists():
            continue
        sm = data_dir / f"{stem}_summary.csv"
        out.append((stem, ts, meta_path, sm if sm.exists() else None))
    return out


def cmd_ingest_check(cfg: RunConfig) -> int:
    data_dir = Path(cfg.data_dir)
    cells = _discover_cells(data_dir)
    if not cells:
        log.error("no cells found in %s", data_dir)
        return 1
    failures = 0
    for cell_id, ts, mj, sm in cells:
        try:
            ds = parse_cell(ts, mj, sm)
            print(f"{cell_id}: ok ({len(ds.records)} records, {len(ds.summaries)} cycles)")
        except PulselifeError as exc:
            failures += 1
            print(f"{cell_id}: FAIL {type(exc).__name__}: {exc}")
    print(f"{len(cells) - failures}/{len(cells)} cells parse cleanly")
    return 1 if failures else 0


# --------------------------------------------------------------------------
# features


def _extract_one(args: tuple) -> tuple[str, dict | None, str | None, list | None]:
    """Worker: parse one cell, extract features and per-threshold labels."""
    cell_id, ts, mj, sm, thresholds, reference, grid_points, window = args
    try:
        ds = parse_cell(ts, mj, sm)
        fv = extract_all(ds, FeatureConfig(grid_points=grid_points))
    except PulselifeError as exc:
        return cell_id, None, f"{type(exc).__name__}: {exc}", None
    labels = []
    ref = SohReference(reference)
    for t in thresholds:
        try:
            lbl = label_eol(
                ds.summaries, t, reference=ref,
                nominal_capacity_ah=ds.meta.nominal_capacity_ah,
                extrapolation_window=window,
            )
            labels.append((lbl.cycles_to_eol, lbl.extrapolated))
        except (NonDecaying, InsufficientData):
            labels.append((None, None))
    return cell_id, fv.values, None, labels


def cmd_features(cfg: RunConfig) -> int:
    data_dir = Path(cfg.data_dir)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, out)
    cells = _discover_cells(data_dir)
    if not cells:
        log.error("no cells found in %s", data_dir)
        return 1
    tasks = [
        (cid, ts, mj, sm, cfg.soh_thresholds, cfg.soh_reference, cfg.grid_points,
         cfg.extrapolation_window)
        for cid, ts, mj, sm in cells
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_extract_one, tasks))
    else:
        results = [_extract_one(t) for t in tasks]

    from .features import FEATURE_NAMES

    exclusions: list[tuple[str, str]] = []
    with open(out / "features.csv", "w", newline="") as ffh, open(
        out / "labels.csv", "w", newline=""
    ) as lfh:
        fw = csv.writer(ffh)
        lw = csv.writer(lfh)
        fw.writerow(("cell_id",) + FEATURE_NAMES)
        label_cols: list[str] = []
        for t in cfg.soh_thresholds:
            label_cols += [f"eol_{_pct(t)}", f"extrapolated_{_pct(t)}"]
        lw.writerow(["cell_id"] + label_cols)
        n_rows = 0
        for cell_id, values, err, labels in results:
            if err is not None:
                exclusions.append((cell_id, err))
                log.warning("excluded %s: %s", cell_id, err)
                continue
            fw.writerow((cell_id,) + tuple(repr(float(values[n])) for n in FEATURE_NAMES))
            row: list[str] = [cell_id]
            for val, extrap in labels:
                row += ["" if val is None else repr(float(val)),
                        "" if extrap is None else str(bool(extrap)).lower()]
            lw.writerow(row)
            n_rows += 1
    with open(out / "exclusions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("cell_id", "reason"))
        w.writerows(exclusions)
    log.info("features: %d rows, %d exclusions", n_rows, len(exclusions))
    return 0


def _read_labels(path: Path, thresholds: tuple[float, ...]) -> dict[float, dict[str, float]]:
    out: dict[float, dict[str, float]] = {t: {} for t in thresholds}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            for t in thresholds:
                raw = row.get(f"eol_{_pct(t)}", "")
                if raw:
                    out[t][row["cell_id"]] = float(raw)
    return out


def _metas_from_dir(data_dir: Path):
    return [read_cell_meta(mj) for _, _, mj, _ in _discover_cells(data_dir)]


# --------------------------------------------------------------------------
# evaluate / report


def cmd_evaluate(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, out)
    fm_path = out / "features.csv"
    if not fm_path.exists():
        log.error("missing %s (run the features command first)", fm_path)
        return 1
    fm = FeatureMatrix.from_csv(fm_path)
    labels_all = _read_labels(out / "labels.csv", cfg.soh_thresholds)
    metas = _metas_from_dir(Path(cfg.data_dir))
    grid = cfg.hyper_grid()
    scheme = cfg.scheme
    target = cfg.sfs_target_for(scheme.kind)
    rollup_rows = []
    meta_by_id = {m.cell_id: m for m in metas}
    for t in cfg.soh_thresholds:
        labels = labels_all[t]
        for family in cfg.feature_family_set:
            report = run_cv(
                fm, labels, metas, scheme, family,
                soh_threshold=t, grid=grid, sfs_target=target,
            )
            tag = f"{scheme.kind}_eol{_pct(t)}_{family}"
            save_report(report, out / f"eval_{tag}.json")
            emit_parity(report, out / f"parity_{tag}.csv")
            # one full-fit model per combination for downstream explanation
            labeled = [cid for cid in fm.cell_ids if cid in labels]
            names = FEATURE_FAMILIES[family]
            rows = {cid: i for i, cid in enumerate(fm.cell_ids)}
            cols = fm.columns(names)
            X = np.array([cols[rows[c]] for c in labeled])
            y = np.array([labels[c] for c in labeled])
            groups = np.array([meta_by_id[c].group_id for c in labeled])
            if len(labeled) >= 4:
                model = pipeline_fit(X, y, names, groups, sfs_target=target, grid=grid)
                model.metadata.update(
                    {"scheme": scheme.kind, "soh_threshold": t, "family": family,
                     "cells": labeled}
                )
                save_model(model, out / f"model_{tag}.json")
            rollup_rows.append((family, t, report.mean_mae))
            log.info("eval %s: mean MAE %.2f cycles", tag, report.mean_mae)
    _write_rollup(out / f"rollup_{scheme.kind}.csv", rollup_rows, cfg.soh_thresholds)
    return 0


def _write_rollup(path: Path, rows: list[tuple[str, float, float]],
                  thresholds: tuple[float, ...]) -> None:
    by_family: dict[str, dict[float, float]] = {}
    for family, t, mae in rows:
        by_family.setdefault(family, {})[t] = mae
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature_family"] + [f"mae_eol_{_pct(t)}" for t in thresholds])
        for family, vals in by_family.items():
            w.writerow([family] + [repr(float(vals.get(t, float("nan")))) for t in thresholds])


def cmd_report(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    from .evaluate import load_report

    paths = sorted(out.glob("eval_*.json"))
    if not paths:
        log.error("no eval reports under %s", out)
        return 1
    print(f"{'scheme':8} {'eol%':>5} {'family':14} {'folds':>5} {'mean MAE':>10}")
    for p in paths:
        r = load_report(p)
        print(
            f"{r.scheme.kind:8} {_pct(r.soh_threshold):>5} {r.feature_family_set:14} "
            f"{len(r.folds):>5} {r.mean_mae:>10.2f}"
        )
    return 0


# --------------------------------------------------------------------------
# explain


def cmd_explain(cfg: RunConfig, model_path: str, cells: str | None) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(cfg, out)
    model = load_model(model_path)
    fm_path = out / "features.csv"
    if not fm_path.exists():
        log.error("missing %s (run the features command first)", fm_path)
        return 1
    fm = FeatureMatrix.from_csv(fm_path)
    trained_on = model.metadata.get("cells", fm.cell_ids)
    background = [fm.row(cid) for cid in trained_on if cid in fm.cell_ids]
    targets = [c for c in (cells.split(",") if cells else fm.cell_ids) if c in fm.cell_ids]
    results = [
        kernel_shap(model, fm.row(cid), background, seed=cfg.seed) for cid in targets
    ]
    stem = Path(model_path).stem.replace("model_", "")
    with open(out / f"shap_values_{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("cell_id", "feature_name", "feature_value", "attribution_cycles"))
        for r in results:
            for name, phi in r.attributions.items():
                w.writerow((r.cell_id, name, repr(r.feature_values[name]), repr(phi)))
    if results:
        summ = shap_summary(results)
        with open(out / f"shap_summary_{stem}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("feature_name", "mean_abs_attribution", "rank"))
            for rank, (name, val) in enumerate(summ.ranking, start=1):
                w.writerow((name, repr(val), rank))
        log.info("explained %d cells over %d features", len(results), len(summ.ranking))
    return 0


# --------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--seed", type=int, help="override config seed")
    common.add_argument("--jobs", type=int, help="parallel workers for per-cell stages")
    common.add_argument("--output", help="override output_dir")
    common.add_argument("--data-dir", help="override data_dir")
    ap = argparse.ArgumentParser(prog="pulselife", description=__doc__, parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common],
                        help="emit a synthetic fleet + ground-truth manifest")
    sp.add_argument("--fleet-spec", required=True, help="fleet layout JSON")
    sub.add_parser("ingest-check", parents=[common],
                   help="parse every cell and report failures")
    sub.add_parser("features", parents=[common],
                   help="extract the 88-feature matrix and labels")
    sub.add_parser("evaluate", parents=[common],
                   help="cross-validate per threshold and feature family")
    xp = sub.add_parser("explain", parents=[common],
                        help="kernel SHAP attributions for a saved model")
    xp.add_argument("--model", required=True, help="serialized pipeline model JSON")
    xp.add_argument("--cells", help="comma-separated cell ids (default: all)")
    sub.add_parser("report", parents=[common],
                   help="print the MAE roll-up from saved eval reports")
    return ap


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(message)s"
    )
    args = _build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "jobs": args.jobs,
        "output_dir": args.output,
        "data_dir": args.data_dir,
    }
    try:
        cfg = _load_config(args.config, overrides)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.fleet_spec)
        if args.command == "ingest-check":
            return cmd_ingest_check(cfg)
        if args.command == "features":
            return cmd_features(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "explain":
            return cmd_explain(cfg, args.model, args.cells)
        if args.command == "report":
            return cmd_report(cfg)
        raise ValueError(f"unhandled command {args.command}")
    except (PulselifeError, ValueError, OSError, json.JSONDecodeError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
