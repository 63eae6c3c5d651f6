"""The prediction pipeline: standardize, select, project, regress.

Fitting order inside one training fold: per-feature standardization,
greedy sequential forward selection scored by grouped inner-CV MAE of the
downstream (PCA + elastic net) fit at mid-grid hyperparameters, inner-CV
grid search for (lambda, alpha) on the selected features, then a final PCA +
elastic-net fit on the whole fold. Nothing outside the training fold is ever
touched, and all tie-breaks are deterministic: canonical feature order, then
lowest lambda, then lowest alpha.

The elastic net minimizes ||y - Xw||^2 + lambda * (alpha * ||w||_1 +
(1 - alpha) * ||w||_2^2) by cyclic coordinate descent (no 1/(2n) scaling on
the residual term; tune lambda grids to this convention).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import (
    FeatureMismatch,
    NonConvergence,
    RankError,
    TargetTooLarge,
    TooFewRows,
)

__all__ = [
    "DEFAULT_SFS_TARGETS",
    "HyperGrid",
    "Standardizer",
    "PcaBasis",
    "EnetFit",
    "PipelineModel",
    "standardize_fit",
    "enet_fit",
    "pca_fit",
    "grouped_kfold",
    "sfs_select",
    "pipeline_fit",
    "pipeline_predict",
    "save_model",
    "load_model",
]

_CONSTANT_STD = 1e-12
_KKT_TOL = 1e-6

# selected-feature budget per CV scheme
DEFAULT_SFS_TARGETS = {"loto": 20, "looco": 12, "lomo": 10, "kfold": 20}


def _default_lambdas() -> tuple[float, ...]:
    return tuple(float(x) for x in np.logspace(-3, 2, 13))


@dataclass(frozen=True)
class HyperGrid:
    """Hyperparameter search space for the nested inner CV."""

    lambdas: tuple[float, ...] = field(default_factory=_default_lambdas)
    alphas: tuple[float, ...] = (0.1, 0.5, 0.9)
    sfs_target: int = 20
    inner_folds: int = 3

    def __post_init__(self) -> None:
        if not self.lambdas or not self.alphas:
            raise ValueError("lambda and alpha grids must be non-empty")
        if any(l <= 0 for l in self.lambdas):
            raise ValueError("lambdas must be positive")
        if any(not 0 <= a <= 1 for a in self.alphas):
            raise ValueError("alphas must lie in [0, 1]")
        if not 1 <= self.sfs_target <= 20:
            raise ValueError("sfs_target must be in [1, 20]")
        if self.inner_folds < 2:
            raise ValueError("inner_folds must be >= 2")

    def midpoint(self) -> tuple[float, float]:
        """Mid-grid (lambda, alpha) used by the selection scorer."""
        return (
            self.lambdas[len(self.lambdas) // 2],
            self.alphas[len(self.alphas) // 2],
        )


@dataclass
class Standardizer:
    """Per-column mean/std; columns with std < 1e-12 are flagged constant."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool; excluded from selection

    def transform(self, X: np.ndarray) -> np.ndarray:
        safe = np.where(self.constant, 1.0, self.std)
        return (X - self.mean) / safe

    def inverse_transform(self, Xs: np.ndarray) -> np.ndarray:
        safe = np.where(self.constant, 1.0, self.std)
        return Xs * safe + self.mean


def standardize_fit(X: np.ndarray) -> Standardizer:
    """Population mean/std per column. Raises TooFewRows below 2 rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewRows(f"need a 2-D matrix with >= 2 rows, got shape {X.shape}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return Standardizer(mean=mean, std=std, constant=std < _CONSTANT_STD)


@dataclass
class EnetFit:
    w: np.ndarray
    intercept: float
    sweeps: int
    kkt_residual: float


def _kkt_residual(X: np.ndarray, resid: np.ndarray, w: np.ndarray, lam: float, alpha: float) -> float:
    """Max violation of the subgradient optimality conditions."""
    g = -2.0 * (X.T @ resid) + 2.0 * lam * (1.0 - alpha) * w
    thr = lam * alpha
    viol = np.where(w != 0.0, np.abs(g + thr * np.sign(w)), np.maximum(np.abs(g) - thr, 0.0))
    return float(viol.max()) if viol.size else 0.0


def enet_fit(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    alpha: float,
    *,
    tol: float = 1e-9,
    max_sweeps: int = 100_000,
) -> EnetFit:
    """Coordinate-descent elastic net with intercept = mean(y).

    The default tolerance is tighter than the 1e-8 sweep criterion so the
    KKT residual lands below 1e-6 on every coordinate; NonConvergence reports
    the final gap otherwise. The per-sweep objective is checked to be
    non-increasing.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if lam < 0 or not 0.0 <= alpha <= 1.0:
        raise ValueError("need lam >= 0 and alpha in [0, 1]")
    intercept = float(y.mean()) if y.size else 0.0
    yc = y - intercept
    if X.shape[1] == 0:
        return EnetFit(np.zeros(0), intercept, 0, 0.0)
    w, sweeps, max_delta, mono = _kernels.enet_cd(X, yc, float(lam), float(alpha), max_sweeps, tol)
    if mono > 0.0:
        raise NonConvergence(f"objective increased by {mono:.3e} during a sweep")
    if max_delta >= tol:
        raise NonConvergence(
            f"coefficient change {max_delta:.3e} >= {tol:.1e} after {sweeps} sweeps"
        )
    kkt = _kkt_residual(X, yc - X @ w, w, lam, alpha)
    if kkt > _KKT_TOL * max(1.0, float(np.abs(yc).max()) if yc.size else 1.0):
        raise NonConvergence(f"KKT residual {kkt:.3e} after {sweeps} sweeps")
    return EnetFit(w=w, intercept=intercept, sweeps=int(sweeps), kkt_residual=kkt)


@dataclass
class PcaBasis:
    """Orthonormal components (rows) sorted by descending explained variance."""

    components: np.ndarray
    explained_variance: np.ndarray
    mean: np.ndarray

    def project(self, Xs: np.ndarray) -> np.ndarray:
        return (Xs - self.mean) @ self.components.T

    @property
    def n_components(self) -> int:
        return int(self.components.shape[0])


def pca_fit(Xs: np.ndarray, n_components: int) -> PcaBasis:
    """Eigendecomposition of the population covariance of Xs.

    Components carry a deterministic sign (largest-magnitude entry positive).
    Raises RankError when the symmetric eigensolver fails.
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    n, p = Xs.shape
    cap = min(n - 1, p)
    if n_components < 1 or n_components > cap:
        raise ValueError(f"n_components {n_components} out of range for shape {Xs.shape}")
    mean = Xs.mean(axis=0)
    Xc = Xs - mean
    cov = (Xc.T @ Xc) / n
    try:
        evals, evecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise RankError(f"covariance eigensolve failed: {exc}") from exc
    order = np.argsort(evals)[::-1][:n_components]
    comps = evecs[:, order].T.copy()
    for row in comps:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return PcaBasis(
        components=comps,
        explained_variance=np.maximum(evals[order], 0.0),
        mean=mean,
    )


def _pca_components_for(Xs: np.ndarray, var_fraction: float) -> int:
    """Smallest count explaining >= var_fraction of variance, capped by rank limits."""
    n, p = Xs.shape
    cap = min(n - 1, p)
    if cap < 1:
        return 0
    Xc = Xs - Xs.mean(axis=0)
    evals = np.linalg.eigvalsh((Xc.T @ Xc) / n)[::-1]
    evals = np.maximum(evals, 0.0)
    total = evals.sum()
    if total <= 0:
        return 0
    cum = np.cumsum(evals[:cap]) / total
    return int(np.searchsorted(cum, var_fraction - 1e-12) + 1)


def grouped_kfold(groups: np.ndarray, k: int) -> list[np.ndarray]:
    """Deterministic grouped k-fold: sorted unique groups dealt round-robin.

    Falls back to row-wise folds when there are fewer than 2 distinct groups.
    Returns per-fold arrays of held-out row indices.
    """
    groups = np.asarray(groups)
    uniq = sorted(set(groups.tolist()))
    if len(uniq) < 2:
        uniq = list(range(groups.size))
        groups = np.arange(groups.size)
    k = max(2, min(k, len(uniq)))
    assignment = {g: i % k for i, g in enumerate(uniq)}
    folds = [np.flatnonzero([assignment[g] == f for g in groups.tolist()]) for f in range(k)]
    return [f for f in folds if f.size]


@dataclass(frozen=True)
class _FitConfig:
    lam: float
    alpha: float
    pca_var: float = 0.99


def _fit_on(Xtr: np.ndarray, ytr: np.ndarray, cfg: _FitConfig):
    """Standardize -> PCA -> elastic net on one training split."""
    std = standardize_fit(Xtr)
    Xs = std.transform(Xtr)
    keep = ~std.constant
    Xs = Xs[:, keep]
    if Xs.shape[1] == 0:
        return std, keep, None, EnetFit(np.zeros(0), float(ytr.mean()), 0, 0.0)
    n_comp = _pca_components_for(Xs, cfg.pca_var)
    if n_comp == 0:
        return std, keep, None, EnetFit(np.zeros(0), float(ytr.mean()), 0, 0.0)
    basis = pca_fit(Xs, n_comp)
    fit = enet_fit(basis.project(Xs), ytr, cfg.lam, cfg.alpha)
    return std, keep, basis, fit


def _predict_on(X: np.ndarray, std, keep, basis, fit) -> np.ndarray:
    Xs = std.transform(X)[:, keep]
    if basis is None or fit.w.size == 0:
        return np.full(X.shape[0], fit.intercept)
    return basis.project(Xs) @ fit.w + fit.intercept


def _inner_cv_mae(
    X: np.ndarray,
    y: np.ndarray,
    groups: np.ndarray,
    cols: np.ndarray,
    cfg: _FitConfig,
    inner_folds: int,
) -> float:
    folds = grouped_kfold(groups, inner_folds)
    maes = []
    for held in folds:
        train = np.setdiff1d(np.arange(X.shape[0]), held)
        if train.size < 2:
            continue
        parts = _fit_on(X[np.ix_(train, cols)], y[train], cfg)
        pred = _predict_on(X[np.ix_(held, cols)], *parts)
        maes.append(float(np.abs(pred - y[held]).mean()))
    if not maes:
        raise TooFewRows("no usable inner folds")
    return float(np.mean(maes))


def sfs_select(
    X: np.ndarray,
    y: np.ndarray,
    target_k: int,
    *,
    groups: np.ndarray,
    grid: HyperGrid,
    candidates: np.ndarray | None = None,
    pca_var: float = 0.99,
) -> np.ndarray:
    """Greedy forward selection; returns a boolean column mask.

    At each step the feature whose addition minimizes the grouped inner-CV
    MAE of the downstream fit (at mid-grid hyperparameters) joins the set;
    ties break toward the lower column index, which is canonical feature
    order. Raises TargetTooLarge when target_k exceeds the candidate pool.
    """
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if candidates is None:
        candidates = X.std(axis=0) >= _CONSTANT_STD
    pool = [int(j) for j in np.flatnonzero(candidates)]
    if target_k > len(pool):
        raise TargetTooLarge(f"target {target_k} > {len(pool)} usable features")
    lam, alpha = grid.midpoint()
    cfg = _FitConfig(lam, alpha, pca_var)
    selected: list[int] = []
    while len(selected) < target_k:
        best_j = -1
        best_score = np.inf
        for j in pool:
            cols = np.array(selected + [j], dtype=np.int64)
            score = _inner_cv_mae(X, y, groups, cols, cfg, grid.inner_folds)
            if score < best_score:
                best_score = score
                best_j = j
        selected.append(best_j)
        pool.remove(best_j)
    mask = np.zeros(p, dtype=bool)
    mask[selected] = True
    return mask


@dataclass
class PipelineModel:
    """A fitted standardize -> select -> PCA -> elastic-net pipeline."""

    feature_names: tuple[str, ...]
    standardizer: Standardizer
    selected: np.ndarray  # bool over feature_names
    pca: PcaBasis
    coef: np.ndarray  # per-component weights
    intercept: float
    lam: float
    alpha: float
    metadata: dict = field(default_factory=dict)

    @property
    def selected_names(self) -> tuple[str, ...]:
        return tuple(n for n, s in zip(self.feature_names, self.selected) if s)


def pipeline_fit(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: tuple[str, ...],
    groups: np.ndarray,
    *,
    sfs_target: int,
    grid: HyperGrid | None = None,
    pca_var: float = 0.99,
) -> PipelineModel:
    """Fit the full pipeline on one training fold.

    sfs_target is a budget: it is clamped to the number of non-constant
    features, and selection is skipped when everything fits the budget.
    """
    grid = grid or HyperGrid()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0] or X.shape[1] != len(feature_names):
        raise FeatureMismatch(
            f"X {X.shape} inconsistent with {len(feature_names)} names / {y.shape[0]} targets"
        )
    std_all = standardize_fit(X)
    usable = ~std_all.constant
    n_usable = int(usable.sum())
    target = min(sfs_target, n_usable)
    if n_usable == 0:
        empty = PcaBasis(np.zeros((0, 0)), np.zeros(0), np.zeros(0))
        return PipelineModel(
            tuple(feature_names), std_all, np.zeros(X.shape[1], dtype=bool),
            empty, np.zeros(0), float(y.mean()), grid.midpoint()[0], grid.midpoint()[1],
        )
    if target < n_usable:
        mask = sfs_select(X, y, target, groups=groups, grid=grid,
                          candidates=usable, pca_var=pca_var)
    else:
        mask = usable.copy()
    cols = np.flatnonzero(mask)

    best = None
    for lam in grid.lambdas:  # ascending order makes ties resolve to lowest lambda
        for alpha in grid.alphas:
            cfg = _FitConfig(float(lam), float(alpha), pca_var)
            mae = _inner_cv_mae(X, y, groups, cols, cfg, grid.inner_folds)
            if best is None or mae < best[0]:
                best = (mae, cfg)
    cfg = best[1]

    std, keep, basis, fit = _fit_on(X[:, cols], y, cfg)
    # fold the sub-selection of constant-in-fold columns back into the mask
    final_mask = np.zeros(X.shape[1], dtype=bool)
    final_mask[cols[keep]] = True
    if basis is None:
        basis = PcaBasis(np.zeros((0, int(keep.sum()))), np.zeros(0), np.zeros(int(keep.sum())))
    sub_std = Standardizer(std.mean[keep], std.std[keep], std.constant[keep])
    return PipelineModel(
        feature_names=tuple(feature_names),
        standardizer=sub_std,
        selected=final_mask,
        pca=basis,
        coef=fit.w,
        intercept=fit.intercept,
        lam=cfg.lam,
        alpha=cfg.alpha,
    )


def pipeline_predict(
    model: PipelineModel,
    X: np.ndarray,
    feature_names: tuple[str, ...] | None = None,
) -> np.ndarray:
    """Predict cycles to end of life for rows of X.

    Columns are aligned to the model by name, so any feature ordering that
    carries its names predicts identically. Raises FeatureMismatch when a
    model feature is absent.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    names = tuple(feature_names) if feature_names is not None else model.feature_names
    if names != model.feature_names:
        try:
            perm = [names.index(n) for n in model.feature_names]
        except ValueError as exc:
            raise FeatureMismatch(f"missing feature: {exc}") from exc
        X = X[:, perm]
    elif X.shape[1] != len(model.feature_names):
        raise FeatureMismatch(
            f"expected {len(model.feature_names)} columns, got {X.shape[1]}"
        )
    Xsel = X[:, model.selected]
    if model.coef.size == 0 or model.pca.n_components == 0:
        return np.full(X.shape[0], model.intercept)
    Xs = model.standardizer.transform(Xsel)
    return model.pca.project(Xs) @ model.coef + model.intercept


# --------------------------------------------------------------------------
# serialization (single JSON document, full-precision floats)

_MODEL_VERSION = "pipeline_v1"


def save_model(model: PipelineModel, path: str | Path) -> None:
    doc = {
        "version": _MODEL_VERSION,
        "feature_names": list(model.feature_names),
        "standardizer": {
            "mean": model.standardizer.mean.tolist(),
            "std": model.standardizer.std.tolist(),
            "constant": model.standardizer.constant.tolist(),
        },
        "selected": model.selected.tolist(),
        "pca": {
            "components": model.pca.components.tolist(),
            "explained_variance": model.pca.explained_variance.tolist(),
            "mean": model.pca.mean.tolist(),
        },
        "coef": model.coef.tolist(),
        "intercept": model.intercept,
        "lambda": model.lam,
        "alpha": model.alpha,
        "metadata": model.metadata,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path: str | Path) -> PipelineModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != _MODEL_VERSION:
        raise FeatureMismatch(f"unsupported model version {doc.get('version')!r}")
    n_sel = int(np.sum(doc["selected"]))
    comps = np.asarray(doc["pca"]["components"], dtype=np.float64)
    if comps.size == 0:
        comps = comps.reshape(0, n_sel)
    return PipelineModel(
        feature_names=tuple(doc["feature_names"]),
        standardizer=Standardizer(
            np.asarray(doc["standardizer"]["mean"], dtype=np.float64),
            np.asarray(doc["standardizer"]["std"], dtype=np.float64),
            np.asarray(doc["standardizer"]["constant"], dtype=bool),
        ),
        selected=np.asarray(doc["selected"], dtype=bool),
        pca=PcaBasis(
            components=comps,
            explained_variance=np.asarray(doc["pca"]["explained_variance"], dtype=np.float64),
            mean=np.asarray(doc["pca"]["mean"], dtype=np.float64),
        ),
        coef=np.asarray(doc["coef"], dtype=np.float64),
        intercept=float(doc["intercept"]),
        lam=float(doc["lambda"]),
        alpha=float(doc["alpha"]),
        metadata=doc.get("metadata", {}),
    )
