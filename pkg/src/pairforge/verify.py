"""Dataset audit: leakage, balance, duplication, hubs and unknown ids.

The verifier never raises on bad data — findings are data, not failures.
It returns a deterministic report; a bundle passes exactly when the report
contains no error-severity violations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple

from .core import SPLIT_ORDER, DatasetBundle, Label, Split, SplitAssignment

DEFAULT_IMBALANCE_TOLERANCE = 0.02
DEFAULT_OVERREPRESENTATION_SHARE = 0.05

_SPLIT_RANK = {Split.TRAIN: 0, Split.VALIDATION: 1, Split.TEST: 2}


@dataclass(frozen=True)
class Violation:
    code: str
    severity: str  # "error" or "warning"
    split: str
    details: Mapping[str, object]

    def to_dict(self) -> Dict[str, object]:
        return {"code": self.code, "severity": self.severity, "split": self.split,
                "details": dict(self.details)}


@dataclass(frozen=True)
class VerificationReport:
    violations: Tuple[Violation, ...]
    summary: Mapping[str, object]

    @property
    def passed(self) -> bool:
        return not any(v.severity == "error" for v in self.violations)

    def by_code(self, code: str) -> List[Violation]:
        return [v for v in self.violations if v.code == code]

    def to_dict(self) -> Dict[str, object]:
        return {
            "passed": self.passed,
            "violations": [v.to_dict() for v in self.violations],
            "summary": dict(self.summary),
        }


def _check_leakage(bundle: DatasetBundle, assignment: SplitAssignment,
                   out: List[Violation]):
    # a pair leaks when some endpoint belongs to a stricter split than the
    # pair was placed in; unknown proteins are handled by their own check
    for split in SPLIT_ORDER:
        for pair in bundle.pairs(split):
            for pid in pair.key:
                endpoint = assignment.mapping.get(pid)
                if endpoint is None:
                    continue
                if _SPLIT_RANK[endpoint] > _SPLIT_RANK[split]:
                    out.append(Violation(
                        "LEAKAGE", "error", split.value,
                        {"a_id": pair.a_id, "b_id": pair.b_id, "protein": pid,
                         "protein_split": endpoint.value}))


def _check_imbalance(bundle: DatasetBundle, tolerance: float, out: List[Violation]):
    for split in SPLIT_ORDER:
        pos, neg = bundle.class_counts(split)
        total = pos + neg
        if total == 0:
            continue
        imbalance = abs(pos - neg) / total
        if imbalance > tolerance:
            out.append(Violation(
                "IMBALANCE", "error", split.value,
                {"positive": pos, "negative": neg,
                 "imbalance": imbalance, "tolerance": tolerance}))


def _check_duplicates(bundle: DatasetBundle, out: List[Violation]):
    seen: Dict[Tuple[str, str], Label] = {}
    for split in SPLIT_ORDER:
        for pair in bundle.pairs(split):
            if pair.key in seen:
                code = ("DUPLICATE_PAIR" if seen[pair.key] is pair.label
                        else "CONFLICTING_LABEL")
                out.append(Violation(code, "error", split.value,
                                     {"a_id": pair.a_id, "b_id": pair.b_id}))
            else:
                seen[pair.key] = pair.label


def _check_overrepresentation(bundle: DatasetBundle, share_limit: float,
                              out: List[Violation]):
    for split in SPLIT_ORDER:
        pairs = bundle.pairs(split)
        if not pairs:
            continue
        counts: Dict[str, int] = {}
        order: List[str] = []
        for pair in pairs:
            for pid in pair.key:
                if pid not in counts:
                    counts[pid] = 0
                    order.append(pid)
                counts[pid] += 1
        for pid in order:
            share = counts[pid] / len(pairs)
            if share > share_limit:
                out.append(Violation(
                    "OVERREPRESENTATION", "warning", split.value,
                    {"protein": pid, "count": counts[pid], "share": share,
                     "share_limit": share_limit}))


def _check_unknown(bundle: DatasetBundle, assignment: SplitAssignment,
                   out: List[Violation]):
    for split in SPLIT_ORDER:
        for pair in bundle.pairs(split):
            for pid in pair.key:
                if pid not in assignment.mapping:
                    out.append(Violation(
                        "UNKNOWN_PROTEIN", "error", split.value,
                        {"a_id": pair.a_id, "b_id": pair.b_id, "protein": pid}))


def _max_share(bundle: DatasetBundle, split: Split) -> float:
    pairs = bundle.pairs(split)
    if not pairs:
        return 0.0
    counts: Dict[str, int] = {}
    for pair in pairs:
        for pid in pair.key:
            counts[pid] = counts.get(pid, 0) + 1
    return max(counts.values()) / len(pairs)


def verify_bundle(bundle: DatasetBundle, assignment: SplitAssignment,
                  imbalance_tolerance: float = DEFAULT_IMBALANCE_TOLERANCE,
                  overrepresentation_share: float = DEFAULT_OVERREPRESENTATION_SHARE,
                  ) -> VerificationReport:
    """Audit a bundle and return a deterministic violation report.

    Checks run in a fixed order: leakage, class imbalance, duplicated or
    conflicting pairs, over-represented proteins (warning only), unknown
    protein ids. Violations are ordered by check, then split, then pair.
    """
    violations: List[Violation] = []
    _check_leakage(bundle, assignment, violations)
    _check_imbalance(bundle, imbalance_tolerance, violations)
    _check_duplicates(bundle, violations)
    _check_overrepresentation(bundle, overrepresentation_share, violations)
    _check_unknown(bundle, assignment, violations)

    summary = {
        "class_counts": {
            s.value: dict(zip(("positive", "negative"), bundle.class_counts(s)))
            for s in SPLIT_ORDER
        },
        "max_protein_share": {s.value: _max_share(bundle, s) for s in SPLIT_ORDER},
    }
    return VerificationReport(violations=tuple(violations), summary=summary)
