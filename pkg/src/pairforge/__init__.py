"""Protein-protein interaction benchmark toolkit.

Builds leakage-controlled datasets from sequence, annotation and embedding
inputs, derives pair feature tensors, induces interpretable rule sets,
trains small neural scorers, and explains their predictions.
"""

from .core import (
    DatasetBundle,
    Label,
    PairExample,
    ProteinRecord,
    Role,
    Split,
    SplitAssignment,
    Task,
    canonical_pair,
    make_bundle,
)
from .errors import PairforgeError

__version__ = "0.1.0"

__all__ = [
    "DatasetBundle",
    "Label",
    "PairExample",
    "PairforgeError",
    "ProteinRecord",
    "Role",
    "Split",
    "SplitAssignment",
    "Task",
    "canonical_pair",
    "make_bundle",
    "__version__",
]
