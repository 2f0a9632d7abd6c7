"""Shared domain types: proteins, labeled pairs, split assignments, bundles.

All types are frozen dataclasses; operations are pure functions. Pair
canonicalization and sequence validation live here because every other
module depends on them.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .errors import PairforgeError


def derive_seed(master: int, stage: str) -> int:
    """Stage-specific seed fanned out from one master seed.

    Hash-based so adding a stage never shifts the streams of other stages.
    """
    digest = hashlib.sha256(f"{master}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
# 'X' (unknown residue) is legal; descriptor code maps it to the mean of
# the 20 canonical residues.
ALPHABET = frozenset(AMINO_ACIDS + "X")


class Role(str, enum.Enum):
    HOST = "host"
    PATHOGEN = "pathogen"


class Task(str, enum.Enum):
    HOST_HOST = "host_host"
    PATHOGEN_HOST = "pathogen_host"


class Label(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


class Split(str, enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


SPLIT_ORDER = (Split.TRAIN, Split.VALIDATION, Split.TEST)


def validate_sequence(raw: str) -> str:
    """Uppercase and validate an amino-acid sequence.

    Raises EMPTY_SEQUENCE for "" and ILLEGAL_RESIDUE (1-based position in
    the details) for letters outside the 21-letter alphabet.
    """
    if not raw:
        raise PairforgeError("EMPTY_SEQUENCE", "sequence is empty")
    seq = raw.upper()
    for i, ch in enumerate(seq):
        if ch not in ALPHABET:
            raise PairforgeError(
                "ILLEGAL_RESIDUE",
                f"illegal residue {ch!r} at position {i + 1}",
                residue=ch,
                position=i + 1,
            )
    return seq


@dataclass(frozen=True)
class ProteinRecord:
    id: str
    role: Role
    sequence: str

    def __post_init__(self):
        if not self.id:
            raise PairforgeError("EMPTY_ID", "protein id must be nonempty")
        object.__setattr__(self, "sequence", validate_sequence(self.sequence))

    @property
    def length(self) -> int:
        return len(self.sequence)


def canonical_pair(a_id: str, b_id: str, task: Task = Task.HOST_HOST,
                   allow_self: bool = False) -> Tuple[str, str]:
    """Canonical storage order for a pair of accessions.

    host-host pairs are unordered and stored lexicographically smallest
    first; pathogen-host pairs keep (pathogen, host) order.
    """
    if not a_id or not b_id:
        raise PairforgeError("EMPTY_ID", "pair ids must be nonempty")
    if a_id == b_id and not allow_self:
        raise PairforgeError("SELF_PAIR", f"self-pair {a_id!r} rejected", id=a_id)
    if task is Task.HOST_HOST and b_id < a_id:
        return (b_id, a_id)
    return (a_id, b_id)


@dataclass(frozen=True)
class PairExample:
    a_id: str
    b_id: str
    label: Label
    source: str = ""

    @property
    def key(self) -> Tuple[str, str]:
        return (self.a_id, self.b_id)


@dataclass(frozen=True)
class SplitAssignment:
    """Protein id -> split, plus the target ratios that produced it.

    ``roles`` records each protein's role so downstream negative synthesis
    can pair pathogen with host proteins; it may be empty for host-only data.
    """

    mapping: Mapping[str, Split]
    ratios: Tuple[float, float, float] = (0.70, 0.10, 0.20)
    roles: Mapping[str, Role] = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.ratios)
        if abs(total - 1.0) > 1e-9:
            raise PairforgeError("BAD_RATIOS", f"ratios sum to {total}, expected 1")

    def role_of(self, protein_id: str) -> Role:
        return self.roles.get(protein_id, Role.HOST)

    def split_of(self, protein_id: str) -> Split:
        try:
            return self.mapping[protein_id]
        except KeyError:
            raise PairforgeError(
                "UNKNOWN_PROTEIN", f"protein {protein_id!r} not in assignment",
                id=protein_id) from None

    def pool(self, split: Split) -> List[str]:
        return sorted(p for p, s in self.mapping.items() if s is split)

    def counts(self) -> Dict[Split, int]:
        out = {s: 0 for s in SPLIT_ORDER}
        for s in self.mapping.values():
            out[s] += 1
        return out


@dataclass(frozen=True)
class DatasetBundle:
    """Labeled pairs grouped by split, with provenance.

    When produced by pair routing, the bundle keeps a reference to the
    protein assignment so per-split protein pools stay derivable.
    """

    task: Task
    splits: Mapping[Split, Tuple[PairExample, ...]]
    seed: int = 0
    sources: Tuple[str, ...] = ()
    assignment: Optional[SplitAssignment] = None

    def pairs(self, split: Split) -> Tuple[PairExample, ...]:
        return self.splits.get(split, ())

    def class_counts(self, split: Split) -> Tuple[int, int]:
        pos = sum(1 for p in self.pairs(split) if p.label is Label.POSITIVE)
        neg = len(self.pairs(split)) - pos
        return pos, neg

    def all_pairs(self) -> List[PairExample]:
        out: List[PairExample] = []
        for s in SPLIT_ORDER:
            out.extend(self.pairs(s))
        return out

    def with_splits(self, splits: Mapping[Split, Iterable[PairExample]]) -> "DatasetBundle":
        frozen = {s: tuple(ps) for s, ps in splits.items()}
        return DatasetBundle(task=self.task, splits=frozen, seed=self.seed,
                             sources=self.sources, assignment=self.assignment)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise PairforgeError("NEGATIVE_COUNT", f"{name} must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def make_bundle(task: Task, train=(), validation=(), test=(), seed: int = 0,
                sources: Iterable[str] = (),
                assignment: Optional[SplitAssignment] = None) -> DatasetBundle:
    return DatasetBundle(
        task=task,
        splits={
            Split.TRAIN: tuple(train),
            Split.VALIDATION: tuple(validation),
            Split.TEST: tuple(test),
        },
        seed=seed,
        sources=tuple(sources),
        assignment=assignment,
    )
