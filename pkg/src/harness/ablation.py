"""Ablation of ROMER's two components over n and lambda."""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.profiler.balance import balance_report
from src.profiler.spread import output_divergence, output_mse
from src.romer.calibration import CalibrationConfig
from .experiment_config import ConfigError, ExperimentConfig
from .runner import METRIC_NOTE, Pipeline, activation_of, fmt, load_inputs, parallel_map

logger = logging.getLogger(__name__)

ABLATION_HEADER = ["axis", "value", "sigma", "temp_c", "mse", "divergence", "mean_entropy"]


@dataclass(frozen=True)
class AblationCell:
    axis: str  # vanilla | n | lambda
    value: float
    sigma: float
    temp_c: Optional[float]
    per_seed: Tuple[Tuple[float, float, float], ...]

    @property
    def means(self) -> Tuple[float, float, float]:
        arr = np.array(self.per_seed)
        return tuple(float(v) for v in arr.mean(axis=0))

    @property
    def mse(self) -> float:
        return self.means[0]


@dataclass
class AblationResult:
    cells: List[AblationCell] = field(default_factory=list)

    def cell(self, axis: str, value: float, sigma: float) -> AblationCell:
        for c in self.cells:
            if c.axis == axis and c.value == value and c.sigma == sigma:
                return c
        raise KeyError(f"no ablation cell {axis}={value} at sigma={sigma}")

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(METRIC_NOTE + "\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(ABLATION_HEADER)
            for c in self.cells:
                mse, div, ent = c.means
                value = fmt(int(c.value)) if c.axis == "n" else fmt(float(c.value))
                writer.writerow(
                    [c.axis, value, fmt(c.sigma), fmt(c.temp_c), fmt(mse), fmt(div), fmt(ent)]
                )
        logger.info(f"Ablation table written to {path}")
        return path


def axis_calibration(base: CalibrationConfig, axis: str, value: float) -> CalibrationConfig:
    """Vary one component with the other switched off."""
    if axis == "n":
        return CalibrationConfig(
            lam=0.0,
            n=int(value),
            bottom_mode=base.bottom_mode,
            replacement=int(value) > 0,
            calibration=False,
            halve_top_logits=base.halve_top_logits,
            order=base.order,
            profile_source=base.profile_source,
        )
    if axis == "lambda":
        return CalibrationConfig(
            lam=float(value),
            n=0,
            bottom_mode=base.bottom_mode,
            replacement=False,
            calibration=True,
            halve_top_logits=base.halve_top_logits,
            order=base.order,
            extended_lambda=True,
            profile_source=base.profile_source,
        )
    raise ValueError(f"unknown ablation axis {axis!r}")


def ablation_grid(
    config: ExperimentConfig,
    n_values: Optional[Sequence[int]] = None,
    lambda_values: Optional[Sequence[float]] = None,
    *,
    points: Optional[Sequence[Tuple[float, Optional[float]]]] = None,
    workers: int = 1,
) -> AblationResult:
    """One cell per (axis value, noise point), metrics averaged over seeds.

    A ``vanilla`` row per point gives the no-mitigation reference; the
    ``n = 0`` and ``lambda = 0`` cells reproduce it exactly.
    """
    spec = config.ablation
    n_values = list(spec.n_values if n_values is None else n_values)
    lambda_values = list(spec.lambda_values if lambda_values is None else lambda_values)
    if points is None:
        points = [(config.temperatures.sigma_at(t), t) for t in spec.temperatures]
        points += [(s, None) for s in spec.sigmas]
    points = list(points)

    model, corpus = load_inputs(config)
    for n in n_values:
        if 2 * n > model.num_experts:
            raise ConfigError(f"ablation n = {n} violates 2n <= E = {model.num_experts}")
    pipe = Pipeline(config, model, corpus)
    seeds = config.trial_seeds()

    axes: List[Tuple[str, float]] = [("vanilla", 0.0)]
    axes += [("n", float(n)) for n in n_values]
    axes += [("lambda", float(lam)) for lam in lambda_values]
    jobs = [(a, p, s) for a in range(len(axes)) for p in range(len(points)) for s in range(len(seeds))]

    def job_fn(job) -> Tuple[float, float, float]:
        a, p, s = job
        axis, value = axes[a]
        cfg = config.noise.with_sigma(points[p][0])
        if axis == "vanilla":
            outputs, trace = pipe.vanilla(cfg, seeds[s])
        else:
            calib = axis_calibration(config.calibration, axis, value)
            outputs, trace, _ = pipe.romer(cfg, calib, seeds[s])
        report = balance_report(activation_of(trace, model))
        return (
            output_mse(pipe.clean_outputs, outputs),
            output_divergence(pipe.clean_outputs, outputs),
            report.mean_entropy,
        )

    logger.info(f"Ablation: {len(axes)} settings x {len(points)} points x {len(seeds)} seeds")
    results: Dict[Tuple[int, int, int], Tuple[float, float, float]] = dict(
        zip(jobs, parallel_map(job_fn, jobs, workers))
    )

    out = AblationResult()
    for a, (axis, value) in enumerate(axes):
        for p, (sigma, temp_c) in enumerate(points):
            per_seed = tuple(results[(a, p, s)] for s in range(len(seeds)))
            out.cells.append(AblationCell(axis, value, sigma, temp_c, per_seed))
    return out
