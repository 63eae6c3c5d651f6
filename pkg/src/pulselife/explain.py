"""Model-agnostic kernel SHAP attribution in raw feature space.

Perturbations and attributions are computed against the untransformed
(selected) features of the pipeline, not its internal PCA components. A
coalition's value is the model prediction averaged over the background set
with the out-of-coalition features replaced by background values
(interventional imputation). With 15 or fewer selected features every
coalition is enumerated and the weighted least-squares solution equals the
exact Shapley values; above that, paired coalition sampling with a seeded
generator is used.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DegenerateWeights
from .features import FeatureVector
from .model import PipelineModel, pipeline_predict

__all__ = ["ShapResult", "ShapSummary", "kernel_shap", "shap_summary"]

_EXACT_LIMIT = 15


@dataclass(frozen=True)
class ShapResult:
    """Per-feature attributions (cycles) for one explained cell.

    base_value is the expected prediction over the background set;
    base_value + sum(attributions) equals the model's prediction for the
    cell (local accuracy). Only the pipeline's selected features carry
    attributions.
    """

    cell_id: str
    base_value: float
    attributions: dict[str, float]
    feature_values: dict[str, float]

    def prediction(self) -> float:
        return self.base_value + sum(self.attributions.values())


@dataclass(frozen=True)
class ShapSummary:
    """Importance ranking plus the raw points for beeswarm-style plots."""

    ranking: list[tuple[str, float]]  # (feature, mean |attribution|), descending
    points: list[tuple[str, str, float, float]]  # (feature, cell, value, attribution)


def _coalition_values(
    model: PipelineModel,
    x_sel: np.ndarray,
    bg_sel: np.ndarray,
    Z: np.ndarray,
    full_x: np.ndarray,
    sel_cols: np.ndarray,
) -> np.ndarray:
    """Mean prediction per coalition row of Z (1 = feature comes from x)."""
    m = Z.shape[0]
    n_bg = bg_sel.shape[0]
    out = np.empty(m)
    chunk = max(1, 262144 // max(n_bg, 1))
    base_rows = np.tile(full_x, (n_bg, 1))
    for lo in range(0, m, chunk):
        zc = Z[lo : lo + chunk]
        c = zc.shape[0]
        # hybrids: coalition features from x, the rest from each background row
        hyb = np.repeat(zc[:, None, :], n_bg, axis=1).astype(np.float64)
        sel_vals = hyb * x_sel + (1.0 - hyb) * bg_sel
        rows = np.repeat(base_rows[None, :, :], c, axis=0).reshape(c * n_bg, -1)
        rows[:, sel_cols] = sel_vals.reshape(c * n_bg, -1)
        preds = pipeline_predict(model, rows)
        out[lo : lo + c] = preds.reshape(c, n_bg).mean(axis=1)
    return out


def _kernel_weight(k: int, s: int) -> float:
    return (k - 1) / (comb(k, s) * s * (k - s))


def _solve_weighted(Z: np.ndarray, v: np.ndarray, w: np.ndarray,
                    v0: float, v1: float) -> np.ndarray:
    """Constrained kernel regression: phi0 = v0, sum(phi) = v1 - v0.

    The efficiency constraint is eliminated by substituting the last
    feature's attribution, leaving an ordinary weighted least squares.
    """
    k = Z.shape[1]
    delta = v1 - v0
    if k == 1:
        return np.array([delta])
    B = Z[:, :-1] - Z[:, -1:]
    t = v - v0 - Z[:, -1] * delta
    sw = np.sqrt(w)
    A = B * sw[:, None]
    b = t * sw
    psi, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < k - 1:
        raise DegenerateWeights(
            f"coalition system rank {rank} < {k - 1}; add samples or background"
        )
    phi = np.empty(k)
    phi[:-1] = psi
    phi[-1] = delta - psi.sum()
    return phi


def _sample_coalitions(k: int, n_samples: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Paired coalition sampling: sizes ~ kernel weight, complements included."""
    rng = np.random.default_rng(seed)
    sizes = np.arange(1, k)
    p = np.array([1.0 / (s * (k - s)) for s in sizes])
    p /= p.sum()
    seen: dict[bytes, int] = {}
    rows: list[np.ndarray] = []
    n_pairs = max(1, n_samples // 2)
    for _ in range(n_pairs):
        s = int(rng.choice(sizes, p=p))
        members = rng.choice(k, size=s, replace=False)
        z = np.zeros(k, dtype=np.int8)
        z[members] = 1
        for cand in (z, 1 - z):
            if 0 < cand.sum() < k:
                key = cand.tobytes()
                if key in seen:
                    seen[key] += 1
                else:
                    seen[key] = 1
                    rows.append(cand.copy())
    Z = np.vstack(rows)
    counts = np.array([seen[r.tobytes()] for r in rows], dtype=np.float64)
    return Z, counts


def kernel_shap(
    model: PipelineModel,
    x: FeatureVector,
    background: list[FeatureVector],
    n_samples: int = 2048,
    seed: int = 0,
) -> ShapResult:
    """Shapley attributions of one prediction over the selected features.

    Exact (all-coalition) mode runs whenever the model selects at most 15
    features; otherwise ``n_samples`` paired coalitions are drawn with the
    given seed. Raises DegenerateWeights if the regression system is
    rank-deficient.
    """
    if not background:
        raise ValueError("background must be non-empty")
    names = model.feature_names
    full_x = x.as_array(names)
    bg = np.vstack([b.as_array(names) for b in background])
    sel_cols = np.flatnonzero(model.selected)
    sel_names = model.selected_names
    k = sel_cols.size

    base_value = float(pipeline_predict(model, bg).mean())
    fx = float(pipeline_predict(model, full_x[None, :])[0])
    values = {n: float(full_x[list(names).index(n)]) for n in sel_names}
    if k == 0:
        return ShapResult(x.cell_id, base_value, {}, values)
    if k == 1:
        return ShapResult(x.cell_id, base_value, {sel_names[0]: fx - base_value}, values)

    x_sel = full_x[sel_cols]
    bg_sel = bg[:, sel_cols]
    if k <= _EXACT_LIMIT:
        m = 2**k - 2
        Z = ((np.arange(1, m + 1)[:, None] >> np.arange(k)) & 1).astype(np.int8)
        w = np.array([_kernel_weight(k, int(z.sum())) for z in Z])
    else:
        Z, counts = _sample_coalitions(k, n_samples, seed)
        w = counts  # sampling already follows the kernel distribution
    v = _coalition_values(model, x_sel, bg_sel, Z, full_x, sel_cols)
    phi = _solve_weighted(Z.astype(np.float64), v, w, base_value, fx)
    return ShapResult(
        cell_id=x.cell_id,
        base_value=base_value,
        attributions={n: float(p) for n, p in zip(sel_names, phi)},
        feature_values=values,
    )


def shap_summary(results: list[ShapResult]) -> ShapSummary:
    """Rank features by mean absolute attribution across cells.

    Ties resolve to the feature order of the first result (canonical order
    for pipeline models).
    """
    if not results:
        raise ValueError("need at least one result")
    order = list(results[0].attributions.keys())
    means = {
        n: float(np.mean([abs(r.attributions.get(n, 0.0)) for r in results]))
        for n in order
    }
    ranking = sorted(means.items(), key=lambda kv: (-kv[1], order.index(kv[0])))
    points = [
        (n, r.cell_id, r.feature_values.get(n, float("nan")), r.attributions[n])
        for r in results
        for n in order
        if n in r.attributions
    ]
    return ShapSummary(ranking=ranking, points=points)
