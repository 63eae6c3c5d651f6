"""Grouped cross-validation harness with MAE reporting and parity emission.

Schemes: leave one triplicate out (loto, one fold per group_id), leave one
operating condition out (looco, one fold per temperature/voltage-range
combination), leave one manufacturer out (lomo), and seeded standard k-fold.
Each fold trains the full pipeline (selection and hyperparameter search
included) on the training side only.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datamodel import CellMeta
from .errors import MissingGrouping
from .features import FEATURE_FAMILIES, FeatureMatrix
from .model import (
    DEFAULT_SFS_TARGETS,
    HyperGrid,
    pipeline_fit,
    pipeline_predict,
)

__all__ = [
    "CvScheme",
    "Fold",
    "FoldReport",
    "EvalReport",
    "make_folds",
    "run_cv",
    "emit_parity",
    "save_report",
    "load_report",
]

log = logging.getLogger("pulselife")

_MIN_TRAIN_CELLS = 4
_REPORT_VERSION = "eval_v1"

SCHEME_KINDS = ("loto", "looco", "lomo", "kfold")


@dataclass(frozen=True)
class CvScheme:
    kind: str
    k: int = 5  # kfold only
    seed: int = 0  # kfold shuffling only

    def __post_init__(self) -> None:
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "kfold" and self.k < 2:
            raise ValueError("kfold requires k >= 2")


@dataclass(frozen=True)
class Fold:
    fold_id: str
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


def _fold_key(meta: CellMeta, kind: str) -> str:
    if kind == "loto":
        return meta.group_id
    if kind == "looco":
        return f"{meta.temperature_c:g}C_{meta.v_min:g}-{meta.v_max:g}V"
    return meta.manufacturer


def make_folds(cells: list[CellMeta], scheme: CvScheme) -> list[Fold]:
    """Partition cells into held-out folds for one scheme.

    Test sets cover every cell exactly once; no cell (and for the grouped
    schemes no group/condition/manufacturer) spans both sides of a fold.
    Raises MissingGrouping for empty grouping fields or folds whose training
    side would be empty.
    """
    if not cells:
        raise MissingGrouping("no cells")
    for m in cells:
        if not m.group_id or not m.manufacturer:
            raise MissingGrouping(f"{m.cell_id}: empty grouping fields")
    if scheme.kind == "kfold":
        ids = sorted(m.cell_id for m in cells)
        rng = np.random.default_rng(scheme.seed)
        order = rng.permutation(len(ids))
        chunks = np.array_split(order, scheme.k)
        folds = []
        for i, chunk in enumerate(chunks):
            test = tuple(ids[j] for j in sorted(chunk))
            train = tuple(x for x in ids if x not in set(test))
            if not train:
                raise MissingGrouping(f"kfold fold {i} has an empty training side")
            folds.append(Fold(f"fold{i}", train, test))
        return folds
    keys = sorted({_fold_key(m, scheme.kind) for m in cells})
    folds = []
    for key in keys:
        test = tuple(sorted(m.cell_id for m in cells if _fold_key(m, scheme.kind) == key))
        train = tuple(sorted(m.cell_id for m in cells if _fold_key(m, scheme.kind) != key))
        if not train:
            raise MissingGrouping(f"fold {key!r} has an empty training side")
        folds.append(Fold(key, train, test))
    return folds


@dataclass(frozen=True)
class FoldReport:
    fold_id: str
    cell_ids: tuple[str, ...]
    y_true: tuple[float, ...]
    y_pred: tuple[float, ...]
    mae: float


@dataclass
class EvalReport:
    scheme: CvScheme
    soh_threshold: float
    feature_family_set: str
    folds: list[FoldReport]
    mean_mae: float
    excluded_cells: tuple[str, ...] = ()
    skipped_folds: tuple[str, ...] = ()
    cell_info: dict[str, dict] = field(default_factory=dict)


def run_cv(
    fm: FeatureMatrix,
    labels: dict[str, float],
    metas: list[CellMeta],
    scheme: CvScheme,
    feature_family_set: str = "all",
    *,
    soh_threshold: float = 0.85,
    grid: HyperGrid | None = None,
    sfs_target: int | None = None,
    pca_var: float = 0.99,
) -> EvalReport:
    """Cross-validate the pipeline over one (scheme, threshold, family) cell.

    Cells without a label are dropped (and counted); folds with fewer than
    4 training cells are skipped and flagged. The default selection budget
    follows the scheme (20 for loto/kfold, 12 for looco, 10 for lomo).
    """
    if feature_family_set not in FEATURE_FAMILIES:
        raise ValueError(f"unknown feature family set {feature_family_set!r}")
    grid = grid or HyperGrid()
    target = DEFAULT_SFS_TARGETS[scheme.kind] if sfs_target is None else sfs_target

    meta_by_id = {m.cell_id: m for m in metas}
    labeled = [cid for cid in fm.cell_ids if cid in labels and cid in meta_by_id]
    excluded = tuple(cid for cid in fm.cell_ids if cid not in labels)
    if excluded:
        log.info("run_cv: excluded %d unlabeled cells", len(excluded))

    names = FEATURE_FAMILIES[feature_family_set]
    rows = {cid: i for i, cid in enumerate(fm.cell_ids)}
    X_all = fm.columns(names)
    X = np.array([X_all[rows[cid]] for cid in labeled])
    y = np.array([labels[cid] for cid in labeled])
    groups = np.array([meta_by_id[cid].group_id for cid in labeled])
    idx_of = {cid: i for i, cid in enumerate(labeled)}

    folds = make_folds([meta_by_id[cid] for cid in labeled], scheme)
    reports: list[FoldReport] = []
    skipped: list[str] = []
    for fold in folds:
        tr = np.array([idx_of[c] for c in fold.train_ids])
        te = np.array([idx_of[c] for c in fold.test_ids])
        if tr.size < _MIN_TRAIN_CELLS:
            log.warning("fold %s skipped: %d training cells", fold.fold_id, tr.size)
            skipped.append(fold.fold_id)
            continue
        t0 = time.perf_counter()
        model = pipeline_fit(
            X[tr], y[tr], names, groups[tr],
            sfs_target=target, grid=grid, pca_var=pca_var,
        )
        pred = pipeline_predict(model, X[te])
        mae = float(np.abs(pred - y[te]).mean())
        log.info(
            "fold=%s family=%s n_train=%d n_test=%d mae=%.2f elapsed=%.2fs",
            fold.fold_id, feature_family_set, tr.size, te.size, mae,
            time.perf_counter() - t0,
        )
        reports.append(
            FoldReport(
                fold_id=fold.fold_id,
                cell_ids=fold.test_ids,
                y_true=tuple(float(v) for v in y[te]),
                y_pred=tuple(float(v) for v in pred),
                mae=mae,
            )
        )
    mean_mae = float(np.mean([r.mae for r in reports])) if reports else float("nan")
    cell_info = {
        cid: {
            "manufacturer": meta_by_id[cid].manufacturer,
            "temperature_c": meta_by_id[cid].temperature_c,
            "v_range": f"{meta_by_id[cid].v_min:g}-{meta_by_id[cid].v_max:g}",
        }
        for cid in labeled
    }
    return EvalReport(
        scheme=scheme,
        soh_threshold=soh_threshold,
        feature_family_set=feature_family_set,
        folds=reports,
        mean_mae=mean_mae,
        excluded_cells=excluded,
        skipped_folds=tuple(skipped),
        cell_info=cell_info,
    )


def emit_parity(report: EvalReport, path: str | Path) -> None:
    """Predicted-vs-actual CSV, one row per held-out cell."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("fold_id", "cell_id", "manufacturer", "temperature_c",
                    "v_range", "y_true", "y_pred"))
        for fold in report.folds:
            for cid, yt, yp in zip(fold.cell_ids, fold.y_true, fold.y_pred):
                info = report.cell_info.get(cid, {})
                w.writerow(
                    (
                        fold.fold_id,
                        cid,
                        info.get("manufacturer", ""),
                        repr(float(info.get("temperature_c", float("nan")))),
                        info.get("v_range", ""),
                        repr(float(yt)),
                        repr(float(yp)),
                    )
                )


def save_report(report: EvalReport, path: str | Path) -> None:
    doc = {
        "version": _REPORT_VERSION,
        "scheme": {"kind": report.scheme.kind, "k": report.scheme.k,
                   "seed": report.scheme.seed},
        "soh_threshold": report.soh_threshold,
        "feature_family_set": report.feature_family_set,
        "mean_mae": report.mean_mae,
        "excluded_cells": list(report.excluded_cells),
        "skipped_folds": list(report.skipped_folds),
        "cell_info": report.cell_info,
        "folds": [
            {
                "fold_id": f.fold_id,
                "cell_ids": list(f.cell_ids),
                "y_true": list(f.y_true),
                "y_pred": list(f.y_pred),
                "mae": f.mae,
            }
            for f in report.folds
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_report(path: str | Path) -> EvalReport:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != _REPORT_VERSION:
        raise ValueError(f"unsupported report version {doc.get('version')!r}")
    return EvalReport(
        scheme=CvScheme(**doc["scheme"]),
        soh_threshold=float(doc["soh_threshold"]),
        feature_family_set=doc["feature_family_set"],
        folds=[
            FoldReport(
                fold_id=f["fold_id"],
                cell_ids=tuple(f["cell_ids"]),
                y_true=tuple(f["y_true"]),
                y_pred=tuple(f["y_pred"]),
                mae=float(f["mae"]),
            )
            for f in doc["folds"]
        ],
        mean_mae=float(doc["mean_mae"]),
        excluded_cells=tuple(doc["excluded_cells"]),
        skipped_folds=tuple(doc["skipped_folds"]),
        cell_info=doc["cell_info"],
    )
