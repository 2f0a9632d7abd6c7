"""Binary classification metrics, decision-threshold tuning and calibration.

All metrics use the 0-when-undefined convention: any metric whose
denominator is zero evaluates to 0.0. A score counts as a positive
prediction only when it is strictly greater than the threshold.
"""

from __future__ import annotations

import math
from typing import Dict, Sequence, Tuple

import numpy as np

from .core import ConfusionMatrix
from .errors import PairforgeError

METRIC_NAMES = ("accuracy", "recall", "precision", "f1", "specificity", "mcc")

TEMPERATURE_BOUNDS = (0.05, 20.0)
_TEMPERATURE_GRID_POINTS = 200
_TEMPERATURE_REFINEMENTS = 40


def _as_labels(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise PairforgeError("BAD_LABEL", "labels must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise PairforgeError("BAD_LABEL", "labels must be 0 or 1")
    return arr.astype(np.int64)


def _as_scores(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        raise PairforgeError("NON_FINITE_VALUE", "scores must be finite")
    return arr


def _check_lengths(labels: np.ndarray, other: np.ndarray):
    if labels.shape[0] != other.shape[0]:
        raise PairforgeError("LENGTH_MISMATCH",
                             f"{labels.shape[0]} labels vs {other.shape[0]} values")
    if labels.shape[0] == 0:
        raise PairforgeError("EMPTY_INPUT", "need at least one example")


def confusion_matrix(labels: Sequence[int], predictions: Sequence[int]) -> ConfusionMatrix:
    """Count the four outcome cells for hard 0/1 predictions."""
    y = _as_labels(labels)
    p = _as_labels(predictions)
    _check_lengths(y, p)
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (y == 1))),
        fp=int(np.sum((p == 1) & (y == 0))),
        tn=int(np.sum((p == 0) & (y == 0))),
        fn=int(np.sum((p == 0) & (y == 1))),
    )


def confusion_from_scores(labels: Sequence[int], scores: Sequence[float],
                          threshold: float) -> ConfusionMatrix:
    """Threshold scores (strictly greater than) and count outcomes."""
    y = _as_labels(labels)
    s = _as_scores(scores)
    _check_lengths(y, s)
    return confusion_matrix(y, (s > threshold).astype(np.int64))


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def classification_metrics(cm: ConfusionMatrix) -> Dict[str, float]:
    """Accuracy, recall, precision, F1, specificity and MCC for one matrix."""
    tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
    mcc_den = math.sqrt(float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return {
        "accuracy": _safe_div(tp + tn, cm.total),
        "recall": _safe_div(tp, tp + fn),
        "precision": _safe_div(tp, tp + fp),
        "f1": _safe_div(2 * tp, 2 * tp + fp + fn),
        "specificity": _safe_div(tn, tn + fp),
        "mcc": _safe_div(tp * tn - fp * fn, mcc_den),
    }


def _objective_values(tp, fp, tn, fn, objective: str) -> np.ndarray:
    tp = tp.astype(np.float64)
    fp = fp.astype(np.float64)
    tn = tn.astype(np.float64)
    fn = fn.astype(np.float64)
    if objective == "accuracy":
        total = tp + fp + tn + fn
        return np.where(total > 0, (tp + tn) / np.maximum(total, 1.0), 0.0)
    if objective == "f1":
        den = 2 * tp + fp + fn
        return np.where(den > 0, 2 * tp / np.maximum(den, 1.0), 0.0)
    if objective == "mcc":
        den = np.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
        return np.where(den > 0, (tp * tn - fp * fn) / np.maximum(den, 1.0), 0.0)
    raise PairforgeError("UNKNOWN_OBJECTIVE", f"objective {objective!r}",
                         objective=objective)


def threshold_candidates(scores: Sequence[float]) -> np.ndarray:
    """Candidate cut points: midpoints between adjacent distinct scores,
    plus one point below the minimum and one above the maximum."""
    s = _as_scores(scores)
    if s.size == 0:
        raise PairforgeError("EMPTY_INPUT", "need at least one score")
    distinct = np.unique(s)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate(([distinct[0] - 1.0], mids, [distinct[-1] + 1.0]))


def tune_threshold(labels: Sequence[int], scores: Sequence[float],
                   objective: str = "mcc") -> Tuple[float, float]:
    """Pick the candidate threshold maximizing the objective.

    Ties go to the smallest threshold. Returns (threshold, objective value).
    """
    if objective not in ("mcc", "f1", "accuracy"):
        raise PairforgeError("UNKNOWN_OBJECTIVE", f"objective {objective!r}",
                             objective=objective)
    y = _as_labels(labels)
    s = _as_scores(scores)
    _check_lengths(y, s)

    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    distinct, starts = np.unique(s_sorted, return_index=True)
    ends = np.concatenate((starts[1:], [s.size])) - 1
    pos_at_or_below = np.cumsum(y_sorted)[ends]
    all_at_or_below = ends + 1

    total_pos = int(y.sum())
    total_neg = y.size - total_pos

    # candidate k predicts negative exactly the examples with the k
    # smallest distinct score values (k = 0 .. len(distinct))
    fn = np.concatenate(([0], pos_at_or_below))
    tn = np.concatenate(([0], all_at_or_below - pos_at_or_below))
    tp = total_pos - fn
    fp = total_neg - tn
    candidates = threshold_candidates(s)

    values = _objective_values(tp, fp, tn, fn, objective)
    best = int(np.argmax(values))  # first maximum = smallest threshold
    return float(candidates[best]), float(values[best])


def _mean_nll(y: np.ndarray, z: np.ndarray) -> float:
    # mean of softplus(z) - y*z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def fit_temperature(labels: Sequence[int], logits: Sequence[float]) -> float:
    """Fit a scalar temperature minimizing calibration NLL.

    Scans a log-spaced grid across the supported temperature range, then
    refines around the best grid point by ternary search. The identity
    temperature 1.0 is always a candidate and wins ties, so calibration
    never increases NLL.
    """
    y = _as_labels(labels).astype(np.float64)
    z = _as_scores(logits)
    _check_lengths(y, z)

    lo, hi = TEMPERATURE_BOUNDS
    log_grid = np.linspace(math.log(lo), math.log(hi), _TEMPERATURE_GRID_POINTS)
    grid = np.exp(log_grid)
    nlls = np.array([_mean_nll(y, z / t) for t in grid])
    best = int(np.argmin(nlls))

    a = log_grid[max(best - 1, 0)]
    b = log_grid[min(best + 1, grid.size - 1)]
    for _ in range(_TEMPERATURE_REFINEMENTS):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if _mean_nll(y, z / math.exp(m1)) <= _mean_nll(y, z / math.exp(m2)):
            b = m2
        else:
            a = m1
    refined = math.exp((a + b) / 2.0)

    best_t, best_nll = 1.0, _mean_nll(y, z)
    for t in (float(grid[best]), refined):
        nll = _mean_nll(y, z / t)
        if nll < best_nll - 1e-12:
            best_t, best_nll = t, nll
    return best_t


def calibrate_scores(logits: Sequence[float], temperature: float) -> np.ndarray:
    """Map logits to calibrated probabilities sigmoid(logit / temperature)."""
    z = _as_scores(logits) / float(temperature)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
