"""Deterministic numeric primitives shared by the simulator.

Modules:
- rng.py: RandomStream over a counter-based Philox generator
- linalg.py: validated float64 containers and the exact matvec kernel
- stats.py: softmax, quantile/IQR and deterministic top-k
- serialization.py: hex-float array encoding for model and corpus files
"""

from .rng import RandomStream, location_id
from .linalg import as_matrix, as_vector, matvec
from .stats import softmax, log_softmax, quantile, iqr, topk_indices

__all__ = [
    "RandomStream",
    "location_id",
    "as_matrix",
    "as_vector",
    "matvec",
    "softmax",
    "log_softmax",
    "quantile",
    "iqr",
    "topk_indices",
]
