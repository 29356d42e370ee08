"""Entropy-graph malware family classification.

Thin Python layer over the C++ core: extraction, training, inference and
metrics. Graphs are 2-D float64 numpy arrays of per-segment entropies.
"""

from ._entrosim import (
    Classifier,
    EntrosimError,
    confusion_matrix,
    entropy_graph,
    entropy_stream,
    extract_corpus,
    extract_file,
    generate_corpus,
    prf_per_class,
    read_egr,
    roc_auc,
    segment_entropy,
    train,
    write_egr,
)

__version__ = "0.3.0"

__all__ = [
    "Classifier",
    "EntrosimError",
    "confusion_matrix",
    "entropy_graph",
    "entropy_stream",
    "extract_corpus",
    "extract_file",
    "generate_corpus",
    "prf_per_class",
    "read_egr",
    "roc_auc",
    "segment_entropy",
    "train",
    "write_egr",
]
