"""Parsers for every external input format.

Sequences arrive as FASTA, labeled pairs as TSV, curated interactions as a
PSI-MITAB 2.5 subset (columns 1, 2 and 15 only), annotations as a
three-column TSV, and precomputed embeddings as either TSV or a compact
binary table. Residue scale tables (Eisenberg hydrophobicity, Sandberg
z-scales) ship as package data and are loaded through the same machinery.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from importlib import resources
from typing import Dict, FrozenSet, Iterable, List, Mapping, Set, Tuple

import numpy as np

from .core import AMINO_ACIDS, Label, PairExample, ProteinRecord, Role, Task, canonical_pair
from .errors import PairforgeError

COMPARTMENTS = ("nucleus", "cytoplasm", "mitochondrion", "er", "endosome",
                "extracellular", "membrane", "other")

ANNOTATION_NAMESPACES = ("compartment", "pfam", "go_bp", "go_mf", "go_cc", "reactome")

EMBEDDING_MAGIC = b"PFEM"
EMBEDDING_VERSION = 1


def _lines(text: str) -> Iterable[Tuple[int, str]]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.rstrip("\r\n")
        if not stripped.strip() or stripped.lstrip().startswith("#"):
            continue
        yield lineno, stripped


# ---------------------------------------------------------------------------
# FASTA


def parse_fasta(text: str) -> List[ProteinRecord]:
    """Parse FASTA text into protein records.

    The header token before the first whitespace is the id; an optional
    ``role=host|pathogen`` key sets the role (default host).
    """
    records: List[ProteinRecord] = []
    seen: Set[str] = set()
    current_id = None
    current_role = Role.HOST
    chunks: List[str] = []

    def flush():
        if current_id is None:
            return
        seq = "".join(chunks)
        records.append(ProteinRecord(id=current_id, role=current_role, sequence=seq))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            header = line[1:].strip()
            if not header:
                raise PairforgeError("MALFORMED_HEADER", f"empty header at line {lineno}",
                                     line=lineno)
            tokens = header.split()
            current_id = tokens[0]
            if current_id in seen:
                raise PairforgeError("DUPLICATE_ID", f"duplicate id {current_id!r}",
                                     id=current_id, line=lineno)
            seen.add(current_id)
            current_role = Role.HOST
            for tok in tokens[1:]:
                if tok.startswith("role="):
                    value = tok[len("role="):]
                    try:
                        current_role = Role(value)
                    except ValueError:
                        raise PairforgeError(
                            "MALFORMED_HEADER", f"unknown role {value!r} at line {lineno}",
                            line=lineno) from None
            chunks = []
        else:
            if current_id is None:
                raise PairforgeError("MALFORMED_HEADER",
                                     f"sequence data before first header at line {lineno}",
                                     line=lineno)
            chunks.append(line)
    flush()
    return records


def write_fasta(records: Iterable[ProteinRecord]) -> str:
    out = []
    for rec in records:
        out.append(f">{rec.id} role={rec.role.value}")
        out.append(rec.sequence)
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Pair tables


def parse_pair_table(text: str, task: Task = Task.HOST_HOST,
                     allow_self: bool = False) -> List[PairExample]:
    """Parse a TSV of (a_id, b_id, label, optional source) rows.

    Labels are 1 (positive) / 0 (negative). Pairs are canonicalized;
    repeated pairs are rejected, with CONFLICTING_LABEL when the copies
    disagree on the label.
    """
    pairs: List[PairExample] = []
    seen: Dict[Tuple[str, str], Label] = {}
    for lineno, line in _lines(text):
        cols = line.split("\t")
        if len(cols) < 3:
            raise PairforgeError("MALFORMED_ROW",
                                 f"expected >= 3 columns at line {lineno}", line=lineno)
        a, b, raw_label = cols[0], cols[1], cols[2]
        source = cols[3] if len(cols) > 3 else ""
        if raw_label == "1":
            label = Label.POSITIVE
        elif raw_label == "0":
            label = Label.NEGATIVE
        else:
            raise PairforgeError("BAD_LABEL", f"label {raw_label!r} at line {lineno}",
                                 line=lineno, label=raw_label)
        key = canonical_pair(a, b, task, allow_self=allow_self)
        if key in seen:
            if seen[key] is not label:
                raise PairforgeError("CONFLICTING_LABEL",
                                     f"pair {key} has both labels", pair=key, line=lineno)
            raise PairforgeError("DUPLICATE_PAIR", f"pair {key} repeated",
                                 pair=key, line=lineno)
        seen[key] = label
        pairs.append(PairExample(a_id=key[0], b_id=key[1], label=label, source=source))
    return pairs


def write_pair_table(pairs: Iterable[PairExample]) -> str:
    rows = []
    for p in pairs:
        label = "1" if p.label is Label.POSITIVE else "0"
        rows.append(f"{p.a_id}\t{p.b_id}\t{label}\t{p.source}")
    return "\n".join(rows) + "\n"


def parse_mitab_subset(text: str, miscore_floor: float = 0.45,
                       task: Task = Task.HOST_HOST) -> List[PairExample]:
    """Parse the consumed subset of PSI-MITAB 2.5.

    Only columns 1-2 (interactor ids, ``uniprotkb:`` prefixed) and column
    15 (confidence, ``intact-miscore:`` entry if any) are read. Rows whose
    miscore falls below ``miscore_floor`` are dropped; rows without a
    miscore are kept. Self pairs and canonical duplicates are skipped.
    All surviving pairs are positives with source "mitab".
    """
    pairs: List[PairExample] = []
    seen: Set[Tuple[str, str]] = set()
    for lineno, line in _lines(text):
        cols = line.split("\t")
        if len(cols) < 15:
            raise PairforgeError("MALFORMED_ROW",
                                 f"expected >= 15 columns at line {lineno}, got {len(cols)}",
                                 line=lineno)
        ids = []
        for col in (cols[0], cols[1]):
            prefix, _, value = col.partition(":")
            if prefix != "uniprotkb" or not value:
                raise PairforgeError("UNSUPPORTED_ID_PREFIX",
                                     f"interactor {col!r} at line {lineno}",
                                     line=lineno, field=col)
            ids.append(value)
        miscore = None
        for part in cols[14].split("|"):
            if part.startswith("intact-miscore:"):
                try:
                    miscore = float(part.split(":", 1)[1])
                except ValueError:
                    raise PairforgeError("MALFORMED_ROW",
                                         f"bad miscore at line {lineno}",
                                         line=lineno) from None
        if miscore is not None and miscore < miscore_floor:
            continue
        if ids[0] == ids[1]:
            continue
        key = canonical_pair(ids[0], ids[1], task)
        if key in seen:
            continue
        seen.add(key)
        pairs.append(PairExample(a_id=key[0], b_id=key[1], label=Label.POSITIVE,
                                 source="mitab"))
    return pairs


# ---------------------------------------------------------------------------
# Annotations


@dataclass(frozen=True)
class AnnotationBundle:
    """Per-protein term sets plus an optional Pfam DDI prior."""

    terms: Mapping[str, Mapping[str, FrozenSet[str]]]
    ddi_prior: FrozenSet[FrozenSet[str]] = frozenset()

    def get(self, protein_id: str, namespace: str) -> FrozenSet[str]:
        return self.terms.get(protein_id, {}).get(namespace, frozenset())


def parse_annotation_table(text: str) -> AnnotationBundle:
    """Parse (protein_id, namespace, term) rows into an AnnotationBundle.

    Compartment terms outside the controlled vocabulary map to ``other``.
    DDI priors come from namespace ``ddi`` rows whose term is
    ``pfamA|pfamB`` (protein column ignored).
    """
    acc: Dict[str, Dict[str, Set[str]]] = {}
    ddi: Set[FrozenSet[str]] = set()
    for lineno, line in _lines(text):
        cols = line.split("\t")
        if len(cols) < 3:
            raise PairforgeError("MALFORMED_ROW",
                                 f"expected 3 columns at line {lineno}", line=lineno)
        protein_id, namespace, term = cols[0], cols[1], cols[2]
        if namespace == "ddi":
            left, sep, right = term.partition("|")
            if not sep or not left or not right:
                raise PairforgeError("MALFORMED_ROW",
                                     f"bad ddi term {term!r} at line {lineno}", line=lineno)
            ddi.add(frozenset((left, right)))
            continue
        if namespace not in ANNOTATION_NAMESPACES:
            raise PairforgeError("UNKNOWN_NAMESPACE",
                                 f"namespace {namespace!r} at line {lineno}",
                                 namespace=namespace, line=lineno)
        if namespace == "compartment" and term not in COMPARTMENTS:
            term = "other"
        acc.setdefault(protein_id, {}).setdefault(namespace, set()).add(term)
    frozen = {pid: {ns: frozenset(ts) for ns, ts in namespaces.items()}
              for pid, namespaces in acc.items()}
    return AnnotationBundle(terms=frozen, ddi_prior=frozenset(ddi))


# ---------------------------------------------------------------------------
# Embeddings


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: Mapping[str, np.ndarray]

    def vector(self, protein_id: str) -> np.ndarray:
        try:
            return self.vectors[protein_id]
        except KeyError:
            raise PairforgeError("MISSING_EMBEDDING",
                                 f"no embedding for {protein_id!r}",
                                 id=protein_id) from None

    def __contains__(self, protein_id: str) -> bool:
        return protein_id in self.vectors


def _check_finite(values: np.ndarray, ident: str):
    if not np.all(np.isfinite(values)):
        raise PairforgeError("NON_FINITE_VALUE",
                             f"non-finite embedding value for {ident!r}", id=ident)


def load_embedding_table(data) -> EmbeddingTable:
    """Load an embedding table from TSV text or the PFEM binary format."""
    if isinstance(data, bytes):
        return _load_embedding_binary(data)
    vectors: Dict[str, np.ndarray] = {}
    dim = None
    for lineno, line in _lines(data):
        cols = line.split("\t")
        ident = cols[0]
        if ident in vectors:
            raise PairforgeError("DUPLICATE_ID", f"duplicate embedding {ident!r}", id=ident)
        try:
            vec = np.array([float(c) for c in cols[1:]], dtype=np.float64)
        except ValueError:
            raise PairforgeError("MALFORMED_ROW",
                                 f"bad number at line {lineno}", line=lineno) from None
        if dim is None:
            dim = vec.size
            if dim == 0:
                raise PairforgeError("MALFORMED_ROW", f"empty vector at line {lineno}",
                                     line=lineno)
        elif vec.size != dim:
            raise PairforgeError("DIMENSION_MISMATCH",
                                 f"row {ident!r} has {vec.size} values, expected {dim}",
                                 id=ident, expected=dim, got=vec.size)
        _check_finite(vec, ident)
        vec.flags.writeable = False
        vectors[ident] = vec
    if dim is None:
        raise PairforgeError("MALFORMED_ROW", "empty embedding table")
    return EmbeddingTable(dim=dim, vectors=vectors)


def _load_embedding_binary(data: bytes) -> EmbeddingTable:
    if data[:4] != EMBEDDING_MAGIC:
        raise PairforgeError("BAD_MAGIC", "not a PFEM embedding file")
    if len(data) < 9 or data[4] != EMBEDDING_VERSION:
        raise PairforgeError("UNSUPPORTED_VERSION",
                             f"unsupported embedding format version {data[4:5]!r}")
    dim = struct.unpack_from("<I", data, 5)[0]
    if dim == 0:
        raise PairforgeError("MALFORMED_ROW", "embedding dimension 0")
    offset = 9
    vectors: Dict[str, np.ndarray] = {}
    while offset < len(data):
        if offset + 2 > len(data):
            raise PairforgeError("MALFORMED_ROW", "truncated embedding record")
        id_len = struct.unpack_from("<H", data, offset)[0]
        offset += 2
        end = offset + id_len + 4 * dim
        if end > len(data):
            raise PairforgeError("MALFORMED_ROW", "truncated embedding record")
        ident = data[offset:offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset += 4 * dim
        if ident in vectors:
            raise PairforgeError("DUPLICATE_ID", f"duplicate embedding {ident!r}", id=ident)
        _check_finite(vec, ident)
        vec.flags.writeable = False
        vectors[ident] = vec
    return EmbeddingTable(dim=dim, vectors=vectors)


def write_embedding_binary(table: EmbeddingTable) -> bytes:
    """Serialize to the PFEM binary format (values narrowed to float32)."""
    out = io.BytesIO()
    out.write(EMBEDDING_MAGIC)
    out.write(bytes([EMBEDDING_VERSION]))
    out.write(struct.pack("<I", table.dim))
    for ident in table.vectors:
        raw = ident.encode("utf-8")
        out.write(struct.pack("<H", len(raw)))
        out.write(raw)
        out.write(np.asarray(table.vectors[ident], dtype="<f4").tobytes())
    return out.getvalue()


def write_embedding_text(table: EmbeddingTable) -> str:
    rows = []
    for ident, vec in table.vectors.items():
        rows.append(ident + "\t" + "\t".join(repr(float(v)) for v in vec))
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# Residue scale tables


@dataclass(frozen=True)
class ScaleTable:
    """Residue -> descriptor vector table (exactly the 20 canonical residues)."""

    name: str
    dim: int
    values: Mapping[str, np.ndarray]

    def unknown_row(self) -> np.ndarray:
        """Descriptor assigned to 'X': the mean of the 20 canonical rows."""
        stack = np.stack([self.values[a] for a in AMINO_ACIDS])
        return stack.mean(axis=0)


def load_scale_table(text: str, name: str) -> ScaleTable:
    values: Dict[str, np.ndarray] = {}
    dim = None
    for lineno, line in _lines(text):
        cols = line.split("\t")
        residue = cols[0]
        if residue not in AMINO_ACIDS:
            raise PairforgeError("BAD_SCALE", f"unexpected residue {residue!r} in {name}",
                                 residue=residue)
        if residue in values:
            raise PairforgeError("BAD_SCALE", f"duplicate residue {residue!r} in {name}",
                                 residue=residue)
        vec = np.array([float(c) for c in cols[1:]], dtype=np.float64)
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise PairforgeError("DIMENSION_MISMATCH",
                                 f"scale row {residue!r} has {vec.size} values, expected {dim}",
                                 residue=residue)
        if not np.all(np.isfinite(vec)):
            raise PairforgeError("NON_FINITE_VALUE", f"non-finite scale value for {residue!r}")
        vec.flags.writeable = False
        values[residue] = vec
    missing = set(AMINO_ACIDS) - set(values)
    if missing:
        raise PairforgeError("BAD_SCALE", f"scale {name} missing residues {sorted(missing)}")
    return ScaleTable(name=name, dim=int(dim), values=values)


def default_scales() -> Tuple[ScaleTable, ScaleTable]:
    """The bundled (Eisenberg 1-D, Sandberg 5-D) scale tables."""
    base = resources.files("pairforge").joinpath("data")
    eis = load_scale_table(base.joinpath("eisenberg.tsv").read_text(), "eisenberg")
    zsc = load_scale_table(base.joinpath("sandberg_z.tsv").read_text(), "sandberg_z")
    return eis, zsc
