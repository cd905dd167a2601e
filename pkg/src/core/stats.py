"""Softmax, quantiles and top-k selection over logit vectors."""

import numpy as np


def softmax(z) -> np.ndarray:
    """Numerically stable softmax.

    Entries equal to ``-inf`` are treated as masked and receive probability
    zero; at least one entry must be finite.

    Raises:
        ValueError: "empty logits" for a zero-length input, or when every
            entry is masked.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0:
        raise ValueError("empty logits")
    if np.any(np.isnan(z)) or np.any(z == np.inf):
        raise ValueError("logits must be finite or -inf (masked)")
    top = np.max(z)
    if top == -np.inf:
        raise ValueError("all logits are masked")
    e = np.exp(z - top)
    return e / np.sum(e)


def log_softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0:
        raise ValueError("empty logits")
    shifted = z - np.max(z)
    return shifted - np.log(np.sum(np.exp(shifted)))


def quantile(z, p: float) -> float:
    """Linear-interpolation quantile on (E - 1) * p.

    With sorted values v_0..v_{E-1} and h = (E - 1) * p this returns
    v[floor(h)] + (h - floor(h)) * (v[floor(h) + 1] - v[floor(h)]), which is
    numpy's ``linear`` method.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0:
        raise ValueError("quantile of empty input")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"quantile fraction must be in [0, 1], got {p}")
    return float(np.quantile(z, p, method="linear"))


def iqr(z) -> float:
    """Interquartile range Q3 - Q1."""
    return quantile(z, 0.75) - quantile(z, 0.25)


def topk_indices(z, k: int) -> list[int]:
    """Indices of the k largest entries.

    Ordered by value descending, ties by ascending index. Masked (-inf)
    entries are never returned.

    Raises:
        ValueError: if k is outside [1, len(z)] or fewer than k entries are
            unmasked.
    """
    z = np.asarray(z, dtype=np.float64)
    if not 1 <= k <= z.size:
        raise ValueError(f"k must be in [1, {z.size}], got {k}")
    available = int(np.count_nonzero(z > -np.inf))
    if available < k:
        raise ValueError(f"only {available} unmasked logits for top-{k} selection")
    order = np.lexsort((np.arange(z.size), -z))
    return [int(i) for i in order[:k]]
