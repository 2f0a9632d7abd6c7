"""NumPy reference implementations of the compiled kernels.

These are the semantic ground truth for ``_ck.pyx``: same sweep order, same
soft-threshold updates, same centering. Kept vectorized where the compiled
code loops, so per-backend results may differ in the last few ulps.
"""

from __future__ import annotations

import numpy as np


def acc_core(values: np.ndarray, max_lag: int) -> np.ndarray:
    """Lagged autocovariance of per-residue descriptor columns.

    values: (L, d) float64, one row per residue. Columns are shifted by
    their first element before centering so constant columns come out as
    exact zeros. Output is ordered dimension-major: (k, lag) for k in
    0..d-1 and lag in 1..max_lag, each entry the mean over i of
    centered[i, k] * centered[i + lag, k] with divisor (L - lag).
    """
    length, dim = values.shape
    shifted = values - values[0]
    centered = shifted - shifted.mean(axis=0)
    out = np.empty((dim, max_lag), dtype=np.float64)
    for lag in range(1, max_lag + 1):
        prod = centered[:-lag] * centered[lag:]
        out[:, lag - 1] = prod.sum(axis=0) / (length - lag)
    return out.ravel()


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z):
    return np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0)


def cd_fit(Xt, y, lam, w, bias, max_sweeps, tol):
    """Cyclic coordinate descent for L1-penalized logistic loss.

    Xt: (p, n) float64, one row per feature column. Minimizes
        mean(softplus(z) - y*z) + lam * sum(|w|),  z = bias + w @ X
    with an unpenalized bias. Each coordinate takes a majorize-minimize
    step with curvature bound 0.25 * mean(x_j^2), so the objective is
    non-increasing per update. Sweeps stop when the max relative
    coefficient change drops below ``tol`` or after ``max_sweeps``.

    Returns (w, bias, sweeps_run, objective_per_sweep).
    """
    Xt = np.ascontiguousarray(Xt, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.array(w, dtype=np.float64, copy=True)
    p, n = Xt.shape
    hj = 0.25 * np.mean(Xt * Xt, axis=1)
    z = bias + w @ Xt
    prob = _sigmoid(z)
    resid = prob - y
    objectives = []
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        max_rel = 0.0
        # unpenalized bias step (curvature bound 0.25)
        g0 = resid.mean()
        delta = -g0 / 0.25
        if delta != 0.0:
            new_b = bias + delta
            denom = max(abs(new_b), abs(bias))
            if denom > 0.0:
                max_rel = max(max_rel, abs(delta) / denom)
            bias = new_b
            z += delta
            prob = _sigmoid(z)
            resid = prob - y
        for j in range(p):
            h = hj[j]
            if h <= 0.0:
                continue
            g = Xt[j] @ resid / n
            u = h * w[j] - g
            w_new = np.sign(u) * max(abs(u) - lam, 0.0) / h
            delta = w_new - w[j]
            if delta != 0.0:
                denom = max(abs(w_new), abs(w[j]))
                if denom > 0.0:
                    max_rel = max(max_rel, abs(delta) / denom)
                w[j] = w_new
                z += delta * Xt[j]
                prob = _sigmoid(z)
                resid = prob - y
        obj = float(np.mean(_softplus(z) - y * z) + lam * np.sum(np.abs(w)))
        objectives.append(obj)
        if max_rel < tol:
            break
    return w, float(bias), sweeps, objectives
