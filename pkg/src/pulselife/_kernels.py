"""Hot numeric kernels with optional numba acceleration.

Every kernel exists twice: a loop-oriented version that numba compiles to
machine code, and a vectorized pure-numpy version. The numba path is active
when numba imports cleanly and ``PULSELIFE_DISABLE_NUMBA`` is not set to a
truthy value; otherwise the numpy path is used. Both paths implement the
same update order, so results agree to floating-point reduction error.
``benchmarks/bench_kernels.py`` times one against the other.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "HAVE_NUMBA",
    "USING_NUMBA",
    "enet_cd",
    "enet_cd_numpy",
    "moments",
    "moments_numpy",
]

# Spreads below this many ulps of the data magnitude are treated as exactly
# constant, so var/skew/kurt collapse to 0 instead of amplifying rounding noise.
_ZERO_SPREAD_ULPS = 256.0 * 2.220446049250313e-16


def _enet_cd_loops(X, y, lam, alpha, max_sweeps, tol):
    """Cyclic coordinate descent for the elastic-net objective.

    Minimizes ||y - X w||^2 + lam * (alpha * ||w||_1 + (1 - alpha) * ||w||_2^2)
    with y already centered. Returns (w, sweeps, max_delta, mono_violation)
    where mono_violation is the largest per-sweep objective increase observed
    (0.0 for a healthy run).
    """
    n, p = X.shape
    w = np.zeros(p)
    col_sq = np.zeros(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        col_sq[j] = s
    resid = y.copy()
    thr = 0.5 * lam * alpha
    ridge = lam * (1.0 - alpha)
    prev_obj = np.inf
    mono_violation = 0.0
    sweeps = 0
    max_delta = np.inf
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            if col_sq[j] <= 0.0:
                continue
            wj = w[j]
            rho = col_sq[j] * wj
            for i in range(n):
                rho += X[i, j] * resid[i]
            if rho > thr:
                wj_new = (rho - thr) / (col_sq[j] + ridge)
            elif rho < -thr:
                wj_new = (rho + thr) / (col_sq[j] + ridge)
            else:
                wj_new = 0.0
            d = wj_new - wj
            if d != 0.0:
                for i in range(n):
                    resid[i] -= d * X[i, j]
                w[j] = wj_new
                ad = abs(d)
                if ad > max_delta:
                    max_delta = ad
        obj = 0.0
        for i in range(n):
            obj += resid[i] * resid[i]
        l1 = 0.0
        l2 = 0.0
        for j in range(p):
            l1 += abs(w[j])
            l2 += w[j] * w[j]
        obj += lam * (alpha * l1 + (1.0 - alpha) * l2)
        if obj > prev_obj:
            inc = obj - prev_obj
            if inc > 1e-12 * (1.0 + abs(prev_obj)) and inc > mono_violation:
                mono_violation = inc
        prev_obj = obj
        sweeps = sweep + 1
        if max_delta < tol:
            break
    return w, sweeps, max_delta, mono_violation


def enet_cd_numpy(X, y, lam, alpha, max_sweeps, tol):
    """Pure-numpy fallback for :func:`enet_cd`; same update order."""
    n, p = X.shape
    w = np.zeros(p)
    col_sq = np.einsum("ij,ij->j", X, X)
    resid = y.astype(np.float64).copy()
    thr = 0.5 * lam * alpha
    ridge = lam * (1.0 - alpha)
    prev_obj = np.inf
    mono_violation = 0.0
    sweeps = 0
    max_delta = np.inf
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            if col_sq[j] <= 0.0:
                continue
            xj = X[:, j]
            wj = w[j]
            rho = col_sq[j] * wj + xj @ resid
            if rho > thr:
                wj_new = (rho - thr) / (col_sq[j] + ridge)
            elif rho < -thr:
                wj_new = (rho + thr) / (col_sq[j] + ridge)
            else:
                wj_new = 0.0
            d = wj_new - wj
            if d != 0.0:
                resid -= d * xj
                w[j] = wj_new
                if abs(d) > max_delta:
                    max_delta = abs(d)
        obj = resid @ resid + lam * (alpha * np.abs(w).sum() + (1.0 - alpha) * (w @ w))
        if obj > prev_obj:
            inc = obj - prev_obj
            if inc > 1e-12 * (1.0 + abs(prev_obj)) and inc > mono_violation:
                mono_violation = inc
        prev_obj = obj
        sweeps = sweep + 1
        if max_delta < tol:
            break
    return w, sweeps, max_delta, mono_violation


def _moments_loops(x):
    """Population moments of a 1-D array.

    Returns (mean, min, max, var, skew, kurt) with skew = m3 / m2^1.5 and
    excess kurtosis m4 / m2^2 - 3. Inputs whose spread is within rounding of
    constant yield var = skew = kurt = 0.
    """
    n = x.shape[0]
    mn = x[0]
    mx = x[0]
    s = 0.0
    for i in range(n):
        v = x[i]
        s += v
        if v < mn:
            mn = v
        if v > mx:
            mx = v
    mean = s / n
    scale = abs(mn)
    if abs(mx) > scale:
        scale = abs(mx)
    if mx - mn <= _ZERO_SPREAD_ULPS * scale:
        return mean, mn, mx, 0.0, 0.0, 0.0
    m2 = 0.0
    m3 = 0.0
    m4 = 0.0
    for i in range(n):
        d = x[i] - mean
        d2 = d * d
        m2 += d2
        m3 += d2 * d
        m4 += d2 * d2
    m2 /= n
    m3 /= n
    m4 /= n
    if m2 <= 0.0:
        return mean, mn, mx, 0.0, 0.0, 0.0
    skew = m3 / m2**1.5
    kurt = m4 / (m2 * m2) - 3.0
    return mean, mn, mx, m2, skew, kurt


def moments_numpy(x):
    """Pure-numpy fallback for :func:`moments`."""
    mn = float(x.min())
    mx = float(x.max())
    mean = float(x.mean())
    scale = max(abs(mn), abs(mx))
    if mx - mn <= _ZERO_SPREAD_ULPS * scale:
        return mean, mn, mx, 0.0, 0.0, 0.0
    d = x - mean
    d2 = d * d
    m2 = float(d2.mean())
    if m2 <= 0.0:
        return mean, mn, mx, 0.0, 0.0, 0.0
    m3 = float((d2 * d).mean())
    m4 = float((d2 * d2).mean())
    return mean, mn, mx, m2, m3 / m2**1.5, m4 / (m2 * m2) - 3.0


def _truthy(value: str | None) -> bool:
    return (value or "").strip().lower() in {"1", "true", "yes", "on"}


HAVE_NUMBA = False
USING_NUMBA = False

if not _truthy(os.environ.get("PULSELIFE_DISABLE_NUMBA")):
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False

if HAVE_NUMBA:
    enet_cd = njit(cache=True)(_enet_cd_loops)
    moments = njit(cache=True)(_moments_loops)
    USING_NUMBA = True
else:
    enet_cd = enet_cd_numpy
    moments = moments_numpy
