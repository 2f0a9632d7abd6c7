"""Protein-disjoint splitting, pair routing and synthetic negatives.

Proteins — not pairs — are assigned to train/validation/test, so no protein
ever appears on both sides of a split boundary. Pairs are then routed by
their most restrictive endpoint (test beats validation beats train), and
negatives are synthesized within each split's own protein pool, which keeps
the disjointness guarantee by construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Set, Tuple

import numpy as np

from .core import (
    SPLIT_ORDER,
    DatasetBundle,
    Label,
    PairExample,
    ProteinRecord,
    Role,
    Split,
    SplitAssignment,
    Task,
    canonical_pair,
    derive_seed,
)
from .errors import PairforgeError
from .ingest import AnnotationBundle


def _largest_remainder_counts(n: int, ratios: Sequence[float]) -> List[int]:
    quotas = [n * r for r in ratios]
    counts = [int(math.floor(q)) for q in quotas]
    leftover = n - sum(counts)
    remainders = sorted(range(len(ratios)), key=lambda i: -(quotas[i] - counts[i]))
    for i in remainders[:leftover]:
        counts[i] += 1
    return counts


def assign_proteins(proteins: Sequence[ProteinRecord],
                    ratios: Tuple[float, float, float] = (0.70, 0.10, 0.20),
                    seed: int = 0) -> SplitAssignment:
    """Shuffle proteins with a seeded generator and partition by ratio.

    Counts use largest-remainder rounding, so each split lands within one
    protein of its exact quota. Deterministic given (input order, seed).
    """
    if len(proteins) < 3:
        raise PairforgeError("TOO_FEW_PROTEINS",
                             f"need at least 3 proteins, got {len(proteins)}",
                             count=len(proteins))
    ids = [p.id for p in proteins]
    if len(set(ids)) != len(ids):
        raise PairforgeError("DUPLICATE_ID", "protein ids must be unique")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]

    counts = _largest_remainder_counts(len(ids), ratios)
    mapping: Dict[str, Split] = {}
    start = 0
    for split, count in zip(SPLIT_ORDER, counts):
        for pid in shuffled[start:start + count]:
            mapping[pid] = split
        start += count
    roles = {p.id: p.role for p in proteins}
    return SplitAssignment(mapping=mapping, ratios=tuple(ratios), roles=roles)


def route_pairs(pairs: Sequence[PairExample], assignment: SplitAssignment,
                task: Task = Task.HOST_HOST, seed: int = 0) -> DatasetBundle:
    """Place each pair in the most restrictive split any endpoint belongs to.

    A pair touching a test protein goes to test; otherwise a pair touching
    a validation protein goes to validation; otherwise it trains.
    """
    buckets: Dict[Split, List[PairExample]] = {s: [] for s in SPLIT_ORDER}
    for pair in pairs:
        splits = {assignment.split_of(pair.a_id), assignment.split_of(pair.b_id)}
        if Split.TEST in splits:
            buckets[Split.TEST].append(pair)
        elif Split.VALIDATION in splits:
            buckets[Split.VALIDATION].append(pair)
        else:
            buckets[Split.TRAIN].append(pair)
    return DatasetBundle(
        task=task,
        splits={s: tuple(ps) for s, ps in buckets.items()},
        seed=seed,
        assignment=assignment,
    )


@dataclass(frozen=True)
class NegativeSynthesisConfig:
    """How to synthesize negatives: target ratio and rejection filters."""

    ratio: float = 1.0
    require_compartment_disjoint: bool = False
    exclude_co_complex: bool = False
    co_complex_pairs: Tuple[Tuple[str, str], ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.ratio <= 0:
            raise PairforgeError("BAD_RATIOS",
                                 f"negative ratio must be positive, got {self.ratio}")


def _split_pools(assignment: SplitAssignment, split: Split,
                 task: Task) -> Tuple[List[str], List[str]]:
    pool = assignment.pool(split)
    if task is Task.PATHOGEN_HOST:
        left = [p for p in pool if assignment.role_of(p) is Role.PATHOGEN]
        right = [p for p in pool if assignment.role_of(p) is Role.HOST]
        return left, right
    return pool, pool


def _candidate_ok(key: Tuple[str, str], forbidden: Set[Tuple[str, str]],
                  annotations: AnnotationBundle,
                  require_disjoint: bool) -> bool:
    if key in forbidden:
        return False
    if require_disjoint:
        shared = (annotations.get(key[0], "compartment")
                  & annotations.get(key[1], "compartment"))
        if shared:
            return False
    return True


def synthesize_negatives(positives: DatasetBundle, annotations: AnnotationBundle,
                         cfg: NegativeSynthesisConfig) -> DatasetBundle:
    """Add seeded uniform negatives to each split of a routed bundle.

    Candidates are unordered pairs within the split's own protein pool
    (pathogen x host pairs for cross-species tasks). A candidate is rejected
    if it is a known positive anywhere, was already sampled, shares a
    compartment when the compartment-disjoint filter is on, or sits in the
    co-complex list when that filter is on. Each split receives
    ceil(ratio x positives) negatives or the run fails with the achieved
    ratio in the error details.
    """
    if positives.assignment is None:
        raise PairforgeError("MISSING_ASSIGNMENT",
                             "bundle must come from route_pairs so protein pools "
                             "are derivable")
    task = positives.task
    assignment = positives.assignment

    forbidden: Set[Tuple[str, str]] = {p.key for p in positives.all_pairs()}
    if cfg.exclude_co_complex:
        for a, b in cfg.co_complex_pairs:
            forbidden.add(canonical_pair(a, b, task))

    new_splits: Dict[Split, Tuple[PairExample, ...]] = {}
    for split in SPLIT_ORDER:
        pos_pairs = positives.pairs(split)
        n_pos = len(pos_pairs)
        target = int(math.ceil(cfg.ratio * n_pos))
        if target == 0:
            new_splits[split] = pos_pairs
            continue

        left, right = _split_pools(assignment, split, task)
        rng = np.random.default_rng(derive_seed(cfg.seed, f"negatives:{split.value}"))
        chosen: List[Tuple[str, str]] = []
        taken: Set[Tuple[str, str]] = set(forbidden)

        if left and right:
            attempts = 0
            max_attempts = 100 * target + 1000
            while len(chosen) < target and attempts < max_attempts:
                attempts += 1
                a = left[int(rng.integers(len(left)))]
                b = right[int(rng.integers(len(right)))]
                if a == b:
                    continue
                key = canonical_pair(a, b, task)
                if not _candidate_ok(key, taken, annotations,
                                     cfg.require_compartment_disjoint):
                    continue
                taken.add(key)
                chosen.append(key)

        if len(chosen) < target:
            # rare path: enumerate what remains and draw without replacement
            if task is Task.PATHOGEN_HOST:
                space: Iterable[Tuple[str, str]] = itertools.product(left, right)
            else:
                space = itertools.combinations(left, 2)
            remaining = [k for k in space
                         if k[0] != k[1] and _candidate_ok(
                             canonical_pair(k[0], k[1], task), taken, annotations,
                             cfg.require_compartment_disjoint)]
            order = rng.permutation(len(remaining))
            for idx in order[:target - len(chosen)]:
                key = canonical_pair(*remaining[int(idx)], task)
                taken.add(key)
                chosen.append(key)

        if len(chosen) < target:
            raise PairforgeError(
                "INSUFFICIENT_CANDIDATES",
                f"{split.value}: wanted {target} negatives, found {len(chosen)}",
                split=split.value, target=target, achieved=len(chosen),
                achieved_ratio=len(chosen) / n_pos)

        negatives = tuple(PairExample(a_id=a, b_id=b, label=Label.NEGATIVE,
                                      source="synthetic") for a, b in chosen)
        new_splits[split] = pos_pairs + negatives

    return DatasetBundle(task=task, splits=new_splits, seed=positives.seed,
                         sources=positives.sources, assignment=assignment)


@dataclass(frozen=True)
class FoldPlan:
    """K train/validation rotations over a frozen test protein set."""

    test: Tuple[str, ...]
    folds: Tuple[Tuple[Tuple[str, ...], Tuple[str, ...]], ...]  # (validation, train)
    seed: int
    roles: Mapping[str, Role] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.folds)

    def assignment_for(self, fold: int) -> SplitAssignment:
        validation, train = self.folds[fold]
        mapping: Dict[str, Split] = {}
        for pid in train:
            mapping[pid] = Split.TRAIN
        for pid in validation:
            mapping[pid] = Split.VALIDATION
        for pid in self.test:
            mapping[pid] = Split.TEST
        total = len(mapping)
        ratios = (len(train) / total, len(validation) / total, len(self.test) / total)
        return SplitAssignment(mapping=mapping, ratios=ratios, roles=self.roles)


def make_fold_plan(assignment: SplitAssignment, k: int, seed: int = 0) -> FoldPlan:
    """Freeze the test pool and rotate the rest through K validation blocks."""
    if k < 2:
        raise PairforgeError("TOO_FEW_FOLDS", f"need at least 2 folds, got {k}", k=k)
    test = tuple(assignment.pool(Split.TEST))
    rest = sorted(assignment.pool(Split.TRAIN) + assignment.pool(Split.VALIDATION))
    if len(rest) < k:
        raise PairforgeError("TOO_FEW_FOLDS",
                             f"{len(rest)} non-test proteins cannot form {k} folds",
                             k=k, proteins=len(rest))

    rng = np.random.default_rng(derive_seed(seed, "folds"))
    shuffled = [rest[i] for i in rng.permutation(len(rest))]
    base, extra = divmod(len(rest), k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        block = shuffled[start:start + size]
        start += size
        validation = tuple(sorted(block))
        train = tuple(sorted(set(rest) - set(block)))
        folds.append((validation, train))
    return FoldPlan(test=test, folds=tuple(folds), seed=seed, roles=assignment.roles)


def split_manifest(bundle: DatasetBundle) -> Dict:
    """JSON-ready description of a routed bundle: seed, ratios, pools, counts."""
    if bundle.assignment is None:
        raise PairforgeError("MISSING_ASSIGNMENT", "bundle has no protein assignment")
    assignment = bundle.assignment
    pools = {s.value: assignment.pool(s) for s in SPLIT_ORDER}
    counts = {}
    for s in SPLIT_ORDER:
        pos, neg = bundle.class_counts(s)
        counts[s.value] = {"positive": pos, "negative": neg}
    return {
        "task": bundle.task.value,
        "seed": bundle.seed,
        "ratios": list(assignment.ratios),
        "pool_strategy": "joint",
        "pools": pools,
        "pair_counts": counts,
        "sources": list(bundle.sources),
    }
