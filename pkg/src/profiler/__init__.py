"""Routing statistics: activation maps, load balance, logit spread, exports."""

from .activation import ActivationMap, accumulate_activation
from .balance import LoadBalanceReport, balance_report, normalized_entropy
from .spread import (
    LogitSpreadStats,
    logit_spread,
    output_divergence,
    output_mse,
    symmetric_kl,
)
from .export import export_heatmap, read_heatmap, write_report

__all__ = [
    "ActivationMap",
    "accumulate_activation",
    "LoadBalanceReport",
    "balance_report",
    "normalized_entropy",
    "LogitSpreadStats",
    "logit_spread",
    "output_divergence",
    "output_mse",
    "symmetric_kl",
    "export_heatmap",
    "read_heatmap",
    "write_report",
]
