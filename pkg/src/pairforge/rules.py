"""Rule induction over the scalar signal table.

A rule is an indicator (sig > t, sig < t, or a two-signal conjunction),
a hinge, or a raw linear term. Rulesets score pairs either by vote
fraction (greedy forward selection, unit weights) or by a sparse
L1-logistic model over candidate rule features (cyclic coordinate
descent), and a hybrid mode keeps whichever validates better.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ._kernels import cd_fit
from .core import Label, PairExample, Task
from .errors import PairforgeError
from .metrics import confusion_from_scores, classification_metrics, tune_threshold
from .features import FeatureContext, signal_registry

logger = logging.getLogger(__name__)


class RuleForm(str, enum.Enum):
    GT = "gt"
    LT = "lt"
    HINGE_POS = "hinge_pos"
    HINGE_NEG = "hinge_neg"
    LINEAR = "linear"
    AND2 = "and2"


_FORM_ORDER = {form: i for i, form in enumerate(RuleForm)}
_INDICATOR_FORMS = (RuleForm.GT, RuleForm.LT, RuleForm.AND2)


@dataclass(frozen=True)
class Rule:
    """One term of Eq-style additive scoring: weight times a rule feature.

    ``mean``/``scale`` standardize the rule feature for sparse-logistic
    rulesets; greedy rules keep the identity standardization.
    """

    signal: str
    form: RuleForm
    threshold: float = 0.0
    weight: float = 1.0
    mean: float = 0.0
    scale: float = 1.0
    signal_b: Optional[str] = None
    threshold_b: Optional[float] = None
    op_a: str = "gt"
    op_b: str = "gt"

    def __post_init__(self):
        if not math.isfinite(self.weight):
            raise PairforgeError("BAD_RULE", f"non-finite weight for {self.signal}")
        if self.form is RuleForm.AND2:
            if self.signal_b is None or self.threshold_b is None:
                raise PairforgeError("BAD_RULE",
                                     "and2 rules need a second signal and threshold")
            if self.op_a not in ("gt", "lt") or self.op_b not in ("gt", "lt"):
                raise PairforgeError("BAD_RULE",
                                     "and2 component ops must be gt or lt")

    @property
    def is_indicator(self) -> bool:
        return self.form in _INDICATOR_FORMS

    def sort_key(self):
        return (self.signal, _FORM_ORDER[self.form], self.threshold,
                self.signal_b or "", self.threshold_b or 0.0, self.weight)


@dataclass(frozen=True)
class RuleSet:
    task: Task
    strategy: str  # "greedy" or "sparse_logistic"
    bias: float
    rules: Tuple[Rule, ...]
    decision_threshold: float
    metrics: Mapping[str, object] = field(default_factory=dict)
    provenance: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.decision_threshold <= 1.0:
            raise PairforgeError("BAD_RULE",
                                 f"decision threshold {self.decision_threshold} "
                                 "outside [0, 1]")


@dataclass(frozen=True)
class ExclusionPolicy:
    """Which signals never become rules, and how broad indicators may fire."""

    excluded_signals: Tuple[str, ...] = ()
    broad_rule_cap: float = 0.90
    apply_exclusions: bool = True
    apply_cap: bool = True

    def __post_init__(self):
        if not 0.0 < self.broad_rule_cap <= 1.0:
            raise PairforgeError("BAD_CAP",
                                 f"broad-rule cap {self.broad_rule_cap} outside (0, 1]")

    def excludes(self, signal: str) -> bool:
        return self.apply_exclusions and signal in self.excluded_signals


def default_exclusion_policy(task: Task = Task.HOST_HOST) -> ExclusionPolicy:
    """Default policy: suppress the annotation-presence (missingness) signals."""
    proxies = tuple(n for n in signal_registry(task) if n.startswith("has_"))
    return ExclusionPolicy(excluded_signals=proxies)


@dataclass(frozen=True)
class SignalTable:
    """A (pairs x signals) value matrix with labels, for one split."""

    matrix: np.ndarray
    labels: np.ndarray
    names: Tuple[str, ...]

    @classmethod
    def build(cls, ctx: FeatureContext, pairs: Sequence[PairExample]) -> "SignalTable":
        matrix, names = ctx.signal_matrix(pairs)
        labels = np.array([1 if p.label is Label.POSITIVE else 0 for p in pairs],
                          dtype=np.int64)
        return cls(matrix=matrix, labels=labels, names=tuple(names))

    @property
    def index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}


def _column(matrix: np.ndarray, index: Mapping[str, int], name: str) -> np.ndarray:
    if name not in index:
        raise PairforgeError("MISSING_SIGNAL", f"signal {name!r} not in table",
                             signal=name)
    return matrix[:, index[name]]


def _indicator(values: np.ndarray, op: str, threshold: float) -> np.ndarray:
    if op == "gt":
        return values > threshold
    return values < threshold


def rule_feature(rule: Rule, matrix: np.ndarray,
                 index: Mapping[str, int]) -> np.ndarray:
    """Evaluate one rule on every row of a signal matrix (raw, unstandardized)."""
    x = _column(matrix, index, rule.signal)
    if rule.form is RuleForm.GT:
        return (x > rule.threshold).astype(np.float64)
    if rule.form is RuleForm.LT:
        return (x < rule.threshold).astype(np.float64)
    if rule.form is RuleForm.HINGE_POS:
        return np.maximum(0.0, x - rule.threshold)
    if rule.form is RuleForm.HINGE_NEG:
        return np.maximum(0.0, rule.threshold - x)
    if rule.form is RuleForm.LINEAR:
        return x.astype(np.float64)
    a = _indicator(x, rule.op_a, rule.threshold)
    b = _indicator(_column(matrix, index, rule.signal_b), rule.op_b, rule.threshold_b)
    return (a & b).astype(np.float64)


def rule_features(rules: Sequence[Rule], table: SignalTable) -> np.ndarray:
    index = table.index
    if not rules:
        return np.empty((table.matrix.shape[0], 0))
    return np.column_stack([rule_feature(r, table.matrix, index) for r in rules])


def _thresholds_for(values: np.ndarray) -> np.ndarray:
    distinct = np.unique(values)
    if distinct.size < 2:
        return np.empty(0)
    if distinct.size <= 10:
        return (distinct[:-1] + distinct[1:]) / 2.0
    return np.unique(np.quantile(values, np.arange(1, 10) / 10.0))


def _column_mcc(column: np.ndarray, labels: np.ndarray) -> float:
    cm = confusion_from_scores(labels, column, threshold=0.5)
    return classification_metrics(cm)["mcc"]


def generate_candidates(table: SignalTable,
                        policy: Optional[ExclusionPolicy] = None,
                        top_k_and2: int = 20) -> List[Rule]:
    """Candidate rules from the training signal distribution.

    Per signal: indicator and hinge rules at midpoints between distinct
    values (when there are at most 10) or at the interior deciles, plus
    one linear term. Conjunctions pair the top indicators ranked by
    single-rule training MCC. Excluded signals produce no candidates;
    indicators firing on more than the broad-rule cap of training pairs
    are dropped.
    """
    if table.matrix.shape[0] == 0:
        raise PairforgeError("EMPTY_TRAINING", "no training rows")
    policy = policy or ExclusionPolicy()

    singles: List[Rule] = []
    for j, name in enumerate(table.names):
        if policy.excludes(name):
            continue
        column = table.matrix[:, j]
        for t in _thresholds_for(column):
            for form in (RuleForm.GT, RuleForm.LT,
                         RuleForm.HINGE_POS, RuleForm.HINGE_NEG):
                singles.append(Rule(signal=name, form=form, threshold=float(t)))
        singles.append(Rule(signal=name, form=RuleForm.LINEAR))

    indicators = [r for r in singles if r.form in (RuleForm.GT, RuleForm.LT)]
    ranked = sorted(range(len(indicators)),
                    key=lambda i: (-_column_mcc(
                        rule_feature(indicators[i], table.matrix, table.index),
                        table.labels), i))
    top = [indicators[i] for i in ranked[:top_k_and2]]
    conjunctions = [
        Rule(signal=a.signal, form=RuleForm.AND2, threshold=a.threshold,
             op_a=a.form.value, signal_b=b.signal, threshold_b=b.threshold,
             op_b=b.form.value)
        for a, b in ((top[i], top[j])
                     for i in range(len(top)) for j in range(i + 1, len(top)))
    ]

    candidates = singles + conjunctions
    if policy.apply_cap:
        kept = []
        for rule in candidates:
            if rule.is_indicator:
                firing = rule_feature(rule, table.matrix, table.index).mean()
                if firing > policy.broad_rule_cap:
                    continue
            kept.append(rule)
        candidates = kept
    return sorted(candidates, key=Rule.sort_key)


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def _objective_at(ruleset: "RuleSet", table: "SignalTable",
                  objective: str) -> float:
    cm = confusion_from_scores(table.labels, score_table(ruleset, table),
                               ruleset.decision_threshold)
    return classification_metrics(cm)[objective]


def _vote_scores(votes: np.ndarray, n_rules: int) -> np.ndarray:
    if n_rules == 0:
        return np.zeros_like(votes)
    return np.clip(votes / n_rules, 0.0, 1.0)


def induce_greedy(candidates: Sequence[Rule], train: SignalTable,
                  validation: SignalTable, objective: str = "mcc",
                  task: Task = Task.HOST_HOST,
                  provenance: Optional[Mapping[str, object]] = None) -> RuleSet:
    """Forward selection of single-signal indicator rules at unit weight.

    Pairs are scored by vote fraction. Each step keeps the one candidate
    whose addition most improves the tuned validation objective, stopping
    at the first step with no strict improvement.
    """
    pool = [r for r in candidates if r.form in (RuleForm.GT, RuleForm.LT)]
    if not pool:
        raise PairforgeError("EMPTY_CANDIDATES",
                             "greedy induction needs single-signal indicators")
    val_cols = rule_features(pool, validation)
    labels = validation.labels

    chosen: List[int] = []
    votes = np.zeros(validation.matrix.shape[0])
    best_value = tune_threshold(labels, _vote_scores(votes, 0), objective)[1]
    best_threshold = 0.0
    improved = True
    while improved:
        improved = False
        step_best: Optional[Tuple[float, float, int]] = None
        for i in range(len(pool)):
            if i in chosen:
                continue
            scores = _vote_scores(votes + val_cols[:, i], len(chosen) + 1)
            threshold, value = tune_threshold(labels, scores, objective)
            if step_best is None or value > step_best[0]:
                step_best = (value, threshold, i)
        if step_best is not None and step_best[0] > best_value:
            best_value, best_threshold, picked = step_best
            chosen.append(picked)
            votes = votes + val_cols[:, picked]
            improved = True

    rules = tuple(pool[i] for i in chosen)
    if chosen:
        final_scores = _vote_scores(votes, len(chosen))
        best_threshold, best_value = tune_threshold(labels, final_scores, objective)
    threshold = _clamp01(best_threshold)
    ruleset = RuleSet(task=task, strategy="greedy", bias=0.0, rules=rules,
                      decision_threshold=threshold,
                      provenance=dict(provenance or {}))
    metrics = {"validation_" + objective: best_value, "objective": objective,
               "n_rules": len(rules),
               "training_" + objective: _objective_at(ruleset, train, objective)}
    return replace(ruleset, metrics=metrics)


@dataclass(frozen=True)
class SparseConfig:
    """L1-logistic settings: rule cap, regularization path, solver limits."""

    max_rules: int = 60
    path_points: int = 50
    lambda_min_ratio: float = 1e-3
    max_sweeps: int = 10_000
    tol: float = 1e-6
    objective: str = "mcc"


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def induce_sparse_logistic(candidates: Sequence[Rule], train: SignalTable,
                           validation: SignalTable,
                           cfg: Optional[SparseConfig] = None,
                           task: Task = Task.HOST_HOST,
                           provenance: Optional[Mapping[str, object]] = None,
                           ) -> RuleSet:
    """L1-penalized logistic regression over standardized rule features.

    The regularization path descends log-uniformly from the smallest
    lambda that zeroes every weight; each solution warm-starts the next.
    The winner is the path point with the best tuned validation objective
    among those within the rule cap, ties going to stronger regularization.
    """
    cfg = cfg or SparseConfig()
    if not candidates:
        raise PairforgeError("EMPTY_CANDIDATES", "no candidate rules")

    features = rule_features(candidates, train)
    n = features.shape[0]
    if n == 0:
        raise PairforgeError("EMPTY_TRAINING", "no training rows")
    means = features.mean(axis=0)
    stds = features.std(axis=0)
    keep = np.flatnonzero(stds > 0)
    if keep.size == 0:
        raise PairforgeError("EMPTY_CANDIDATES",
                             "every candidate is constant on training data")
    kept_rules = [candidates[j] for j in keep]
    means = means[keep]
    stds = stds[keep]
    x_std = (features[:, keep] - means) / stds

    y = train.labels.astype(np.float64)
    lam_max = float(np.max(np.abs(x_std.T @ (y - y.mean()) / n)))
    if lam_max <= 0:
        raise PairforgeError("EMPTY_CANDIDATES",
                             "labels are constant; nothing to fit")
    # nudge the start above the exact all-zero boundary so the first path
    # point cannot admit a weight through float rounding
    lam_max *= 1.0 + 1e-10
    path = np.geomspace(lam_max, lam_max * cfg.lambda_min_ratio, cfg.path_points)

    val_features = rule_features(kept_rules, validation)
    val_std = (val_features - means) / stds

    xt = np.ascontiguousarray(x_std.T)
    weights = np.zeros(keep.size)
    bias = float(np.log(y.mean() / (1.0 - y.mean()))) if 0 < y.mean() < 1 else 0.0

    best: Optional[Tuple[float, float, np.ndarray, float, float, int]] = None
    nnz_path: List[int] = []
    converged_path: List[bool] = []
    for lam in path:
        weights, bias, sweeps, objectives = cd_fit(xt, y, float(lam), weights,
                                                   bias, cfg.max_sweeps, cfg.tol)
        diffs = np.diff(objectives)
        if diffs.size and diffs.max() > 1e-10:
            raise PairforgeError("NON_FINITE_LOSS",
                                 "coordinate descent objective increased",
                                 max_increase=float(diffs.max()))
        nnz = int(np.count_nonzero(weights))
        nnz_path.append(nnz)
        converged_path.append(sweeps < cfg.max_sweeps)
        if nnz > cfg.max_rules:
            continue
        val_scores = _sigmoid(bias + val_std @ weights)
        threshold, value = tune_threshold(validation.labels, val_scores,
                                          cfg.objective)
        if best is None or value > best[0]:
            best = (value, threshold, weights.copy(), bias, float(lam), nnz)

    if best is None:
        raise PairforgeError("NO_FEASIBLE_LAMBDA",
                             f"no path point satisfies the {cfg.max_rules}-rule cap")

    value, threshold, w_best, b_best, lam_best, nnz = best
    rules = tuple(
        replace(kept_rules[j], weight=float(w_best[j]), mean=float(means[j]),
                scale=float(stds[j]))
        for j in np.flatnonzero(w_best))
    ruleset = RuleSet(task=task, strategy="sparse_logistic", bias=float(b_best),
                      rules=rules, decision_threshold=_clamp01(threshold),
                      provenance=dict(provenance or {}))
    metrics = {"validation_" + cfg.objective: value, "objective": cfg.objective,
               "lambda": lam_best, "n_rules": len(rules), "nnz_path": nnz_path,
               "converged_path": converged_path,
               "training_" + cfg.objective: _objective_at(ruleset, train,
                                                          cfg.objective)}
    return replace(ruleset, metrics=metrics)


def induce_hybrid(candidates: Sequence[Rule], train: SignalTable,
                  validation: SignalTable, cfg: Optional[SparseConfig] = None,
                  objective: str = "mcc", task: Task = Task.HOST_HOST,
                  provenance: Optional[Mapping[str, object]] = None) -> RuleSet:
    """Run greedy and sparse induction; keep the better validation score.

    Exact ties prefer the smaller ruleset, then the greedy strategy. If one
    strategy fails with EMPTY_CANDIDATES the other's result is returned.
    """
    cfg = cfg or SparseConfig(objective=objective)
    results: List[RuleSet] = []
    errors: List[PairforgeError] = []
    for runner in (
            lambda: induce_greedy(candidates, train, validation, objective,
                                  task, provenance),
            lambda: induce_sparse_logistic(candidates, train, validation, cfg,
                                           task, provenance)):
        try:
            results.append(runner())
        except PairforgeError as err:
            if err.code != "EMPTY_CANDIDATES":
                raise
            errors.append(err)
            logger.warning("hybrid induction: one strategy failed (%s)", err)
    if not results:
        raise errors[0]
    if len(results) == 1:
        return results[0]

    def rank(rs: RuleSet):
        # higher objective first, then fewer rules, then greedy
        value = rs.metrics["validation_" + rs.metrics["objective"]]
        return (-value, len(rs.rules), 0 if rs.strategy == "greedy" else 1)

    return min(results, key=rank)


def _scalar_rule_value(rule: Rule, signals: Mapping[str, float]) -> float:
    if rule.signal not in signals:
        raise PairforgeError("MISSING_SIGNAL", f"signal {rule.signal!r} missing",
                             signal=rule.signal)
    x = signals[rule.signal]
    if rule.form is RuleForm.GT:
        return 1.0 if x > rule.threshold else 0.0
    if rule.form is RuleForm.LT:
        return 1.0 if x < rule.threshold else 0.0
    if rule.form is RuleForm.HINGE_POS:
        return max(0.0, x - rule.threshold)
    if rule.form is RuleForm.HINGE_NEG:
        return max(0.0, rule.threshold - x)
    if rule.form is RuleForm.LINEAR:
        return x
    if rule.signal_b not in signals:
        raise PairforgeError("MISSING_SIGNAL", f"signal {rule.signal_b!r} missing",
                             signal=rule.signal_b)
    fire_a = x > rule.threshold if rule.op_a == "gt" else x < rule.threshold
    xb = signals[rule.signal_b]
    fire_b = xb > rule.threshold_b if rule.op_b == "gt" else xb < rule.threshold_b
    return 1.0 if fire_a and fire_b else 0.0


def score_ruleset(ruleset: RuleSet,
                  signals: Mapping[str, float]) -> Tuple[float, Label]:
    """Score one pair's signals: (score in [0, 1], predicted label).

    Greedy rulesets score by vote fraction; sparse ones by the logistic of
    the standardized weighted sum. Summation follows a canonical rule
    order, so the score never depends on rule storage order.
    """
    ordered = sorted(ruleset.rules, key=Rule.sort_key)
    if ruleset.strategy == "greedy":
        if not ordered:
            score = 0.0
        else:
            votes = sum(_scalar_rule_value(r, signals) for r in ordered)
            score = _clamp01(votes / len(ordered))
    else:
        z = ruleset.bias
        for rule in ordered:
            raw = _scalar_rule_value(rule, signals)
            z += rule.weight * (raw - rule.mean) / rule.scale
        score = float(_sigmoid(np.array([z]))[0])
    label = Label.POSITIVE if score > ruleset.decision_threshold else Label.NEGATIVE
    return score, label


def score_table(ruleset: RuleSet, table: SignalTable) -> np.ndarray:
    """Vectorized score_ruleset over a whole signal table."""
    ordered = sorted(ruleset.rules, key=Rule.sort_key)
    n = table.matrix.shape[0]
    if ruleset.strategy == "greedy":
        if not ordered:
            return np.zeros(n)
        votes = np.zeros(n)
        for rule in ordered:
            votes += rule_feature(rule, table.matrix, table.index)
        return np.clip(votes / len(ordered), 0.0, 1.0)
    z = np.full(n, ruleset.bias)
    for rule in ordered:
        raw = rule_feature(rule, table.matrix, table.index)
        z += rule.weight * (raw - rule.mean) / rule.scale
    return _sigmoid(z)


# ---------------------------------------------------------------------------
# Serialization


def _rule_to_dict(rule: Rule) -> Dict[str, object]:
    return {
        "signal": rule.signal,
        "form": rule.form.value,
        "threshold": rule.threshold,
        "weight": rule.weight,
        "mean": rule.mean,
        "scale": rule.scale,
        "signal_b": rule.signal_b,
        "threshold_b": rule.threshold_b,
        "op_a": rule.op_a,
        "op_b": rule.op_b,
    }


def ruleset_to_json(ruleset: RuleSet) -> str:
    """Canonical JSON (sorted keys, fixed layout): byte-stable round trips."""
    payload = {
        "task": ruleset.task.value,
        "strategy": ruleset.strategy,
        "bias": ruleset.bias,
        "decision_threshold": ruleset.decision_threshold,
        "rules": [_rule_to_dict(r) for r in ruleset.rules],
        "metrics": dict(ruleset.metrics),
        "provenance": dict(ruleset.provenance),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def parse_ruleset(text: str) -> RuleSet:
    data = json.loads(text)
    try:
        task = Task(data["task"])
    except (KeyError, ValueError):
        raise PairforgeError("UNKNOWN_FORM", "missing or invalid task") from None
    registry = set(signal_registry(task))
    rules = []
    for raw in data.get("rules", []):
        try:
            form = RuleForm(raw["form"])
        except (KeyError, ValueError):
            raise PairforgeError("UNKNOWN_FORM",
                                 f"unknown rule form {raw.get('form')!r}") from None
        for key in ("signal", "signal_b"):
            name = raw.get(key)
            if name is not None and name not in registry:
                raise PairforgeError("UNKNOWN_SIGNAL",
                                     f"signal {name!r} not in the {task.value} registry",
                                     signal=name)
        rules.append(Rule(
            signal=raw["signal"], form=form, threshold=raw.get("threshold", 0.0),
            weight=raw.get("weight", 1.0), mean=raw.get("mean", 0.0),
            scale=raw.get("scale", 1.0), signal_b=raw.get("signal_b"),
            threshold_b=raw.get("threshold_b"), op_a=raw.get("op_a", "gt"),
            op_b=raw.get("op_b", "gt")))
    return RuleSet(
        task=task, strategy=data["strategy"], bias=data["bias"],
        rules=tuple(rules), decision_threshold=data["decision_threshold"],
        metrics=data.get("metrics", {}), provenance=data.get("provenance", {}))


# ---------------------------------------------------------------------------
# Plain-text rendering (one rule per line: expression, weight, notes slot)


def _fmt_number(value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)


def _fmt_indicator(signal: str, op: str, threshold: float) -> str:
    # midpoint thresholds between integers display as the integer bound:
    # x > 0.5 on a 0/1 signal reads "x > 0", x < 0.5 reads "x < 1"
    half_below = threshold - 0.5
    if half_below == int(half_below):
        shown = int(half_below) if op == "gt" else int(half_below) + 1
        return f"{signal} {'>' if op == 'gt' else '<'} {shown}"
    return f"{signal} {'>' if op == 'gt' else '<'} {_fmt_number(threshold)}"


def render_rule(rule: Rule) -> str:
    if rule.form in (RuleForm.GT, RuleForm.LT):
        return _fmt_indicator(rule.signal, rule.form.value, rule.threshold)
    if rule.form is RuleForm.HINGE_POS:
        return f"max(0, {rule.signal} - {_fmt_number(rule.threshold)})"
    if rule.form is RuleForm.HINGE_NEG:
        return f"max(0, {_fmt_number(rule.threshold)} - {rule.signal})"
    if rule.form is RuleForm.LINEAR:
        return rule.signal
    left = _fmt_indicator(rule.signal, rule.op_a, rule.threshold)
    right = _fmt_indicator(rule.signal_b, rule.op_b, rule.threshold_b)
    return f"{left} and {right}"


def render_ruleset(ruleset: RuleSet) -> str:
    lines = [
        f"# task: {ruleset.task.value}",
        f"# strategy: {ruleset.strategy}",
        f"# bias: {_fmt_number(ruleset.bias)}",
        f"# decision_threshold: {_fmt_number(ruleset.decision_threshold)}",
        "rule\tweight\tinterpretation",
    ]
    for rule in ruleset.rules:
        lines.append(f"{render_rule(rule)}\t{_fmt_number(rule.weight)}\t-")
    return "\n".join(lines) + "\n"


_INDICATOR_RE = re.compile(r"^\s*(\w+)\s*([<>])\s*(-?[\d.eE+]+)\s*$")
_HINGE_RE = re.compile(r"^\s*max\(0,\s*(.+?)\s*-\s*(.+?)\s*\)\s*$")
_NUMBER_RE = re.compile(r"^-?[\d.eE+]+$")


def _parse_indicator(text: str) -> Tuple[str, str, float]:
    match = _INDICATOR_RE.match(text)
    if not match:
        raise PairforgeError("UNKNOWN_FORM", f"cannot parse rule text {text!r}")
    signal, op, value = match.groups()
    return signal, ("gt" if op == ">" else "lt"), float(value)


def parse_rendered_rule(text: str, weight: float = 1.0) -> Rule:
    """Parse one rendered rule expression back into a Rule.

    Integer-rendered indicator bounds parse literally (x < 1 stays
    threshold 1.0); for integer-valued signals the semantics coincide.
    """
    text = text.strip()
    if " and " in text:
        left, right = text.split(" and ", 1)
        sig_a, op_a, thr_a = _parse_indicator(left)
        sig_b, op_b, thr_b = _parse_indicator(right)
        return Rule(signal=sig_a, form=RuleForm.AND2, threshold=thr_a,
                    weight=weight, signal_b=sig_b, threshold_b=thr_b,
                    op_a=op_a, op_b=op_b)
    hinge = _HINGE_RE.match(text)
    if hinge:
        left, right = hinge.group(1).strip(), hinge.group(2).strip()
        if _NUMBER_RE.match(left):
            return Rule(signal=right, form=RuleForm.HINGE_NEG,
                        threshold=float(left), weight=weight)
        return Rule(signal=left, form=RuleForm.HINGE_POS,
                    threshold=float(right), weight=weight)
    if re.match(r"^\w+$", text):
        return Rule(signal=text, form=RuleForm.LINEAR, weight=weight)
    signal, op, threshold = _parse_indicator(text)
    return Rule(signal=signal, form=RuleForm(op), threshold=threshold, weight=weight)
