"""Logit-spread statistics and output-distribution divergence."""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from src.core.stats import log_softmax
from src.moe.trace import RoutingTrace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LogitSpreadStats:
    """Mean per-token logit variance per layer, clean and noisy."""

    clean_variance: List[float]
    noisy_variance: List[float]
    ratio: List[float]

    @property
    def mean_ratio(self) -> float:
        return float(np.mean(self.ratio)) if self.ratio else 1.0

    def to_dict(self) -> dict:
        return {
            "clean_variance": list(self.clean_variance),
            "noisy_variance": list(self.noisy_variance),
            "ratio": list(self.ratio),
            "mean_ratio": self.mean_ratio,
        }


def _variance_ratio(noisy: float, clean: float) -> float:
    if clean == 0.0:
        if noisy == 0.0:
            return 1.0
        logger.warning("Clean logit variance is zero; spread ratio is infinite")
        return float("inf")
    return noisy / clean


def logit_spread(clean_trace: RoutingTrace, noisy_trace: RoutingTrace) -> LogitSpreadStats:
    """Per layer: mean over tokens of var(z); ratio noisy / clean.

    Raises:
        ValueError: if the traces cover different tokens or logit shapes.
    """
    num_layers = clean_trace.num_layers()
    if noisy_trace.num_layers() != num_layers:
        raise ValueError(
            f"trace layer counts differ: {num_layers} clean vs {noisy_trace.num_layers()} noisy"
        )
    clean_var, noisy_var, ratio = [], [], []
    for layer in range(num_layers):
        zc = clean_trace.logits_matrix(layer)
        zn = noisy_trace.logits_matrix(layer)
        if zc.shape != zn.shape:
            raise ValueError(f"layer {layer}: logit shapes differ ({zc.shape} vs {zn.shape})")
        c = float(np.mean(np.var(zc, axis=1)))
        n = float(np.mean(np.var(zn, axis=1)))
        clean_var.append(c)
        noisy_var.append(n)
        ratio.append(_variance_ratio(n, c))
    return LogitSpreadStats(clean_var, noisy_var, ratio)


def symmetric_kl(a: np.ndarray, b: np.ndarray) -> float:
    """KL(p||q) + KL(q||p) for p = softmax(a), q = softmax(b)."""
    la, lb = log_softmax(a), log_softmax(b)
    pa, pb = np.exp(la), np.exp(lb)
    value = float(np.sum(pa * (la - lb)) + np.sum(pb * (lb - la)))
    return max(value, 0.0)


def output_divergence(
    ref_outputs: Sequence[np.ndarray], test_outputs: Sequence[np.ndarray]
) -> float:
    """Mean symmetric KL between softmax-normalized output vectors."""
    if len(ref_outputs) != len(test_outputs):
        raise ValueError(
            f"output sets differ in length: {len(ref_outputs)} vs {len(test_outputs)}"
        )
    if not ref_outputs:
        return 0.0
    total = 0.0
    for a, b in zip(ref_outputs, test_outputs):
        a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
        if a.shape != b.shape:
            raise ValueError(f"output shapes differ: {a.shape} vs {b.shape}")
        total += symmetric_kl(a, b)
    return total / len(ref_outputs)


def output_mse(ref_outputs: Sequence[np.ndarray], test_outputs: Sequence[np.ndarray]) -> float:
    """Mean over tokens of the mean squared difference of output vectors."""
    if len(ref_outputs) != len(test_outputs):
        raise ValueError(
            f"output sets differ in length: {len(ref_outputs)} vs {len(test_outputs)}"
        )
    if not ref_outputs:
        return 0.0
    ref = np.vstack(ref_outputs)
    test = np.vstack(test_outputs)
    if ref.shape != test.shape:
        raise ValueError(f"output shapes differ: {ref.shape} vs {test.shape}")
    return float(np.mean((test - ref) ** 2))
