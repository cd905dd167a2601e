"""Load-balance metrics over an activation map."""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .activation import ActivationMap

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.1


@dataclass(frozen=True)
class LoadBalanceReport:
    """Per-layer normalized entropy, max/mean ratio and underactivated fraction."""

    entropy: List[float]
    max_mean_ratio: List[float]
    underactivated_fraction: List[float]
    empty_layers: List[int] = field(default_factory=list)
    tau: float = DEFAULT_TAU

    @property
    def mean_entropy(self) -> float:
        return float(np.mean(self.entropy)) if self.entropy else 0.0

    @property
    def mean_underactivated_fraction(self) -> float:
        return float(np.mean(self.underactivated_fraction)) if self.underactivated_fraction else 0.0

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "mean_entropy": self.mean_entropy,
            "mean_underactivated_fraction": self.mean_underactivated_fraction,
            "entropy": list(self.entropy),
            "max_mean_ratio": list(self.max_mean_ratio),
            "underactivated_fraction": list(self.underactivated_fraction),
            "empty_layers": list(self.empty_layers),
        }


def normalized_entropy(row: np.ndarray) -> float:
    """Entropy of ``row / row.sum()`` divided by log(E); 0.0 for an empty row."""
    total = float(np.sum(row))
    if total <= 0.0:
        return 0.0
    if row.size == 1:
        return 1.0
    p = row / total
    nz = p[p > 0]
    h = float(-np.sum(nz * np.log(nz)) / np.log(row.size))
    return min(max(h, 0.0), 1.0)


def balance_report(amap: ActivationMap, tau: float = DEFAULT_TAU) -> LoadBalanceReport:
    if not 0.0 <= tau:
        raise ValueError(f"tau must be >= 0, got {tau}")
    entropy, ratio, under, empty = [], [], [], []
    num_experts = amap.num_experts
    for layer, row in enumerate(amap.values):
        total = float(row.sum())
        if total <= 0.0:
            empty.append(layer)
            entropy.append(0.0)
            ratio.append(0.0)
            under.append(0.0)
            continue
        mean = total / num_experts
        entropy.append(normalized_entropy(row))
        ratio.append(float(row.max() / mean))
        under.append(float(np.count_nonzero(row < tau * mean)) / num_experts)
    if empty:
        logger.warning(f"Balance report: layers {empty} received no activation")
    return LoadBalanceReport(entropy, ratio, under, empty, tau)
