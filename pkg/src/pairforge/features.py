"""Descriptors, pair tensors and the scalar signal table.

Per-protein vectors concatenate a precomputed embedding with two lagged
autocovariance descriptors of the sequence: one over the five Sandberg
z-scales, one over Eisenberg hydrophobicity. Pairs get a four-channel
tensor [A | B | |A-B| | A*B] plus a named table of scalar signals
(vector similarities, annotation overlaps, lengths, interaction-graph
neighborhood terms) that feeds rule induction.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ._kernels import acc_core
from .core import Label, PairExample, ProteinRecord, Task
from .errors import PairforgeError
from .ingest import (
    COMPARTMENTS,
    AnnotationBundle,
    EmbeddingTable,
    ScaleTable,
    default_scales,
)

_JACCARD_NAMESPACES = ("pfam", "go_bp", "go_mf", "go_cc", "reactome")
_HAS_NAMESPACES = ("pfam", "go_bp", "go_mf", "go_cc", "reactome", "compartment")
_SIM_NAMES = ("cos", "dot", "euclid", "absdiff_mean", "a_norm", "b_norm")
_BLOCK_NAMES = ("emb", "zacc", "eacc")


@dataclass(frozen=True)
class DescriptorConfig:
    """Autocovariance settings: lag depth, scales, optional cross terms."""

    max_lag: int = 5
    include_cross_terms: bool = False
    scales: Tuple[ScaleTable, ScaleTable] = field(default_factory=default_scales)

    def __post_init__(self):
        if self.max_lag < 1:
            raise PairforgeError("BAD_LAG",
                                 f"max_lag must be >= 1, got {self.max_lag}")

    @property
    def hydropathy(self) -> ScaleTable:
        return self.scales[0]

    @property
    def zscales(self) -> ScaleTable:
        return self.scales[1]


def _scale_matrix(sequence: str, scale: ScaleTable) -> np.ndarray:
    unknown = scale.unknown_row()
    rows = [scale.values.get(ch) if ch != "X" else unknown for ch in sequence]
    return np.asarray(rows, dtype=np.float64)


def _acc_cross_terms(values: np.ndarray, max_lag: int) -> np.ndarray:
    length, dim = values.shape
    centered = values - values.mean(axis=0)
    out = np.empty((dim, dim, max_lag))
    for lag in range(1, max_lag + 1):
        out[:, :, lag - 1] = centered[:-lag].T @ centered[lag:] / (length - lag)
    mask = ~np.eye(dim, dtype=bool)
    return out[mask].ravel()  # ordered by (row dim, column dim, lag)


def acc_descriptor(sequence: str, scale: ScaleTable, max_lag: int,
                   include_cross_terms: bool = False) -> np.ndarray:
    """Lagged autocovariance of a sequence under a residue scale.

    Per scale dimension k, residues are mean-centered along the sequence
    and ACC_k(lag) = mean over i of centered_k(i) * centered_k(i + lag),
    for lags 1..max_lag; output ordered by (dimension, lag). With cross
    terms enabled, covariances between different dimensions are appended,
    ordered by (first dimension, second dimension, lag).
    """
    length = len(sequence)
    if length <= max_lag:
        raise PairforgeError("SEQUENCE_TOO_SHORT",
                             f"length {length} needs more than {max_lag} residues",
                             length=length, max_lag=max_lag)
    values = _scale_matrix(sequence, scale)
    auto = acc_core(values, max_lag)
    if include_cross_terms and scale.dim > 1:
        return np.concatenate([auto, _acc_cross_terms(values, max_lag)])
    return auto


@dataclass(frozen=True)
class FeatureVector:
    """A protein's feature values plus named block boundaries."""

    values: np.ndarray
    blocks: Mapping[str, Tuple[int, int]]

    def block(self, name: str) -> np.ndarray:
        start, stop = self.blocks[name]
        return self.values[start:stop]


def protein_feature_vector(protein: ProteinRecord, embeddings: EmbeddingTable,
                           cfg: DescriptorConfig) -> FeatureVector:
    """[embedding | z-scale descriptor | hydropathy descriptor] for one protein."""
    emb = embeddings.vector(protein.id)
    try:
        zacc = acc_descriptor(protein.sequence, cfg.zscales, cfg.max_lag,
                              cfg.include_cross_terms)
        eacc = acc_descriptor(protein.sequence, cfg.hydropathy, cfg.max_lag)
    except PairforgeError as err:
        if err.code == "SEQUENCE_TOO_SHORT":
            raise PairforgeError("SEQUENCE_TOO_SHORT",
                                 f"{protein.id}: {err}", id=protein.id,
                                 **err.details) from None
        raise
    values = np.concatenate([emb, zacc, eacc])
    blocks = {
        "emb": (0, emb.size),
        "zacc": (emb.size, emb.size + zacc.size),
        "eacc": (emb.size + zacc.size, values.size),
    }
    return FeatureVector(values=values, blocks=blocks)


@dataclass(frozen=True)
class PairFeatures:
    """Four-channel pair tensor with channel and per-protein block maps."""

    values: np.ndarray
    channels: Mapping[str, Tuple[int, int]]
    blocks: Mapping[str, Tuple[int, int]]

    def channel(self, name: str) -> np.ndarray:
        start, stop = self.channels[name]
        return self.values[start:stop]


def pair_feature_vector(u: np.ndarray, v: np.ndarray,
                        blocks: Optional[Mapping[str, Tuple[int, int]]] = None,
                        ) -> PairFeatures:
    """Stack [A | B | |A-B| | A*B] for two equal-length protein vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise PairforgeError("DIMENSION_MISMATCH",
                             f"vectors of shape {u.shape} and {v.shape}")
    m = u.size
    values = np.concatenate([u, v, np.abs(u - v), u * v])
    channels = {"a": (0, m), "b": (m, 2 * m), "contrast": (2 * m, 3 * m),
                "concordance": (3 * m, 4 * m)}
    return PairFeatures(values=values, channels=channels, blocks=blocks or {})


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v)) / (nu * nv)


def _similarities(u: np.ndarray, v: np.ndarray) -> Dict[str, float]:
    diff = u - v
    return {
        "cos": _cosine(u, v),
        "dot": float(np.dot(u, v)),
        "euclid": float(np.linalg.norm(diff)),
        "absdiff_mean": float(np.mean(np.abs(diff))) if u.size else 0.0,
        "a_norm": float(np.linalg.norm(u)),
        "b_norm": float(np.linalg.norm(v)),
    }


def pair_scalar_signals(u: np.ndarray, v: np.ndarray,
                        blocks: Mapping[str, Tuple[int, int]],
                        task: Task = Task.HOST_HOST) -> Dict[str, float]:
    """Similarity signals over the full vectors and over each block.

    Emits cos/dot/euclid/absdiff_mean and both branch norms, plain-named
    for the full vector and suffixed per block. For cross-species pairs the
    host embedding-branch norm is additionally exposed as human_norm_emb.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise PairforgeError("DIMENSION_MISMATCH",
                             f"vectors of shape {u.shape} and {v.shape}")
    out = dict(_similarities(u, v))
    for block in _BLOCK_NAMES:
        start, stop = blocks[block]
        for name, value in _similarities(u[start:stop], v[start:stop]).items():
            out[f"{name}_{block}"] = value
    if task is Task.PATHOGEN_HOST:
        out["human_norm_emb"] = out["b_norm_emb"]
    return out


def _jaccard(x: FrozenSet[str], y: FrozenSet[str]) -> float:
    union = x | y
    if not union:
        return 0.0
    return len(x & y) / len(union)


def annotation_signals(a_id: str, b_id: str, ann: AnnotationBundle,
                       task: Task = Task.HOST_HOST,
                       lengths: Optional[Mapping[str, int]] = None,
                       ) -> Dict[str, float]:
    """Overlap, compartment, length and annotation-presence signals.

    The tar_in_* compartment indicators describe the second ("target")
    protein: the host side of a cross-species pair. comp_disjoint_known is
    1 only when both proteins carry compartment annotations and the sets
    do not intersect — absence of knowledge is not disjointness.
    """
    lengths = lengths or {}
    out: Dict[str, float] = {}
    for ns in _JACCARD_NAMESPACES:
        out[f"{ns}_jaccard"] = _jaccard(ann.get(a_id, ns), ann.get(b_id, ns))

    pfam_a = ann.get(a_id, "pfam")
    pfam_b = ann.get(b_id, "pfam")
    hit = any(frozenset((pa, pb)) in ann.ddi_prior
              for pa in sorted(pfam_a) for pb in sorted(pfam_b))
    out["ddi_prior_hit"] = 1.0 if hit else 0.0

    comp_a = ann.get(a_id, "compartment")
    comp_b = ann.get(b_id, "compartment")
    out["comp_overlap"] = 1.0 if comp_a & comp_b else 0.0
    out["comp_disjoint_known"] = (1.0 if comp_a and comp_b and not (comp_a & comp_b)
                                  else 0.0)
    for comp in COMPARTMENTS:
        out[f"tar_in_{comp}"] = 1.0 if comp in comp_b else 0.0

    len_a = float(lengths.get(a_id, 0))
    len_b = float(lengths.get(b_id, 0))
    out["len_a"] = len_a
    out["len_b"] = len_b
    out["len_absdiff"] = abs(len_a - len_b)
    out["len_ratio"] = (min(len_a, len_b) / max(len_a, len_b)
                        if len_a > 0 and len_b > 0 else 0.0)

    for ns in _HAS_NAMESPACES:
        out[f"has_{ns}_a"] = 1.0 if ann.get(a_id, ns) else 0.0
        out[f"has_{ns}_b"] = 1.0 if ann.get(b_id, ns) else 0.0
    return out


@dataclass(frozen=True)
class GraphIndex:
    """Symmetric adjacency over training positives only."""

    adjacency: Mapping[str, FrozenSet[str]]

    def neighbors(self, protein_id: str) -> FrozenSet[str]:
        return self.adjacency.get(protein_id, frozenset())

    def degree(self, protein_id: str) -> int:
        return len(self.neighbors(protein_id))


def build_graph_index(train_positives: Sequence[PairExample]) -> GraphIndex:
    """Adjacency from training positives; negatives are ignored."""
    acc: Dict[str, set] = {}
    for pair in train_positives:
        if pair.label is not Label.POSITIVE:
            continue
        acc.setdefault(pair.a_id, set()).add(pair.b_id)
        acc.setdefault(pair.b_id, set()).add(pair.a_id)
    return GraphIndex(adjacency={k: frozenset(v) for k, v in acc.items()})


def graph_signals(a_id: str, b_id: str, graph: GraphIndex) -> Dict[str, float]:
    """Degrees, common neighbors, neighborhood Jaccard, preferential attachment."""
    na = graph.neighbors(a_id)
    nb = graph.neighbors(b_id)
    union = na | nb
    return {
        "deg_a": float(len(na)),
        "deg_b": float(len(nb)),
        "common_neighbors": float(len(na & nb)),
        "nbr_jaccard": len(na & nb) / len(union) if union else 0.0,
        "pref_attach": float(len(na) * len(nb)),
    }


def signal_registry(task: Task = Task.HOST_HOST) -> List[str]:
    """Canonical column order for the scalar signal table."""
    names: List[str] = []
    names += list(_SIM_NAMES)
    for block in _BLOCK_NAMES:
        names += [f"{sim}_{block}" for sim in _SIM_NAMES]
    if task is Task.PATHOGEN_HOST:
        names.append("human_norm_emb")
    names += [f"{ns}_jaccard" for ns in _JACCARD_NAMESPACES]
    names += ["ddi_prior_hit", "comp_overlap", "comp_disjoint_known"]
    names += [f"tar_in_{comp}" for comp in COMPARTMENTS]
    names += ["len_a", "len_b", "len_absdiff", "len_ratio"]
    for ns in _HAS_NAMESPACES:
        names += [f"has_{ns}_a", f"has_{ns}_b"]
    names += ["deg_a", "deg_b", "common_neighbors", "nbr_jaccard", "pref_attach"]
    return names


def _thread_count() -> int:
    raw = os.environ.get("PAIRFORGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


class FeatureContext:
    """Caches per-protein vectors and composes per-pair features/signals.

    Built once per dataset: reuses one graph index (training positives
    only) and one descriptor configuration for every pair.
    """

    def __init__(self, records: Sequence[ProteinRecord],
                 embeddings: EmbeddingTable,
                 annotations: AnnotationBundle,
                 train_positives: Sequence[PairExample] = (),
                 cfg: Optional[DescriptorConfig] = None,
                 task: Task = Task.HOST_HOST):
        self.records = {r.id: r for r in records}
        self.embeddings = embeddings
        self.annotations = annotations
        self.cfg = cfg or DescriptorConfig()
        self.task = task
        self.graph = build_graph_index(train_positives)
        self.lengths = {r.id: r.length for r in records}
        self._vectors: Dict[str, FeatureVector] = {}

    def protein_vector(self, protein_id: str) -> FeatureVector:
        if protein_id not in self._vectors:
            record = self.records.get(protein_id)
            if record is None:
                raise PairforgeError("UNKNOWN_PROTEIN",
                                     f"no record for {protein_id!r}", id=protein_id)
            self._vectors[protein_id] = protein_feature_vector(
                record, self.embeddings, self.cfg)
        return self._vectors[protein_id]

    @property
    def pair_dim(self) -> int:
        any_id = next(iter(self.records))
        return 4 * self.protein_vector(any_id).values.size

    def pair_features(self, pair: PairExample) -> PairFeatures:
        fa = self.protein_vector(pair.a_id)
        fb = self.protein_vector(pair.b_id)
        return pair_feature_vector(fa.values, fb.values, blocks=fa.blocks)

    def pair_signals(self, pair: PairExample) -> Dict[str, float]:
        fa = self.protein_vector(pair.a_id)
        fb = self.protein_vector(pair.b_id)
        row = pair_scalar_signals(fa.values, fb.values, fa.blocks, self.task)
        row.update(annotation_signals(pair.a_id, pair.b_id, self.annotations,
                                      self.task, self.lengths))
        row.update(graph_signals(pair.a_id, pair.b_id, self.graph))
        return row

    def signal_matrix(self, pairs: Sequence[PairExample]
                      ) -> Tuple[np.ndarray, List[str]]:
        """(n_pairs, n_signals) matrix in registry column order."""
        names = signal_registry(self.task)
        # warm the per-protein cache serially; worker threads then only read
        for pair in pairs:
            self.protein_vector(pair.a_id)
            self.protein_vector(pair.b_id)

        def row(pair: PairExample) -> List[float]:
            values = self.pair_signals(pair)
            return [values[name] for name in names]

        workers = _thread_count()
        if workers > 1 and len(pairs) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(row, pairs))  # map preserves input order
        else:
            rows = [row(pair) for pair in pairs]
        matrix = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, len(names)))
        if matrix.size and not np.all(np.isfinite(matrix)):
            raise PairforgeError("NON_FINITE_VALUE", "signal table has non-finite values")
        return matrix, names

    def tensor_matrix(self, pairs: Sequence[PairExample]) -> np.ndarray:
        """(n_pairs, 4m') stacked pair tensors."""
        rows = [self.pair_features(pair).values for pair in pairs]
        return (np.vstack(rows) if rows
                else np.empty((0, self.pair_dim)))


def signals_to_tsv(matrix: np.ndarray, names: Sequence[str],
                   pairs: Sequence[PairExample]) -> str:
    """Signal table as TSV: pair ids, label, then one column per signal."""
    header = "\t".join(["a_id", "b_id", "label"] + list(names))
    lines = [header]
    for pair, row in zip(pairs, matrix):
        label = "1" if pair.label is Label.POSITIVE else "0"
        cells = [pair.a_id, pair.b_id, label] + [repr(float(x)) for x in row]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def signals_from_tsv(text: str) -> Tuple[np.ndarray, List[str], List[PairExample]]:
    """Inverse of :func:`signals_to_tsv`; exact float round trip."""
    lines = text.splitlines()
    if not lines:
        raise PairforgeError("MALFORMED_ROW", "empty signal table")
    header = lines[0].split("\t")
    if header[:3] != ["a_id", "b_id", "label"]:
        raise PairforgeError("MALFORMED_ROW",
                             f"unexpected signal header {header[:3]}")
    names = header[3:]
    pairs: List[PairExample] = []
    rows: List[List[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != len(header):
            raise PairforgeError("MALFORMED_ROW",
                                 f"expected {len(header)} columns at line "
                                 f"{lineno}", line=lineno)
        if cols[2] not in ("0", "1"):
            raise PairforgeError("BAD_LABEL", f"label {cols[2]!r} at line "
                                 f"{lineno}", line=lineno)
        label = Label.POSITIVE if cols[2] == "1" else Label.NEGATIVE
        pairs.append(PairExample(a_id=cols[0], b_id=cols[1], label=label))
        try:
            rows.append([float(c) for c in cols[3:]])
        except ValueError:
            raise PairforgeError("MALFORMED_ROW",
                                 f"bad number at line {lineno}",
                                 line=lineno) from None
    matrix = (np.asarray(rows, dtype=np.float64) if rows
              else np.empty((0, len(names))))
    return matrix, names, pairs
