"""Experiment pipeline: clean, vanilla-noisy and ROMER runs over noise points."""

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.moe.model import MoEModel, model_forward
from src.noise.specs import NoiseConfig
from src.profiler.activation import ActivationMap, accumulate_activation
from src.profiler.balance import LoadBalanceReport, balance_report
from src.profiler.export import export_heatmap, write_report
from src.profiler.spread import output_divergence, output_mse
from src.romer.calibration import CalibrationConfig
from src.romer.pipeline import romer_model_forward
from src.romer.plan import ReplacementPlan, apply_replacement, build_replacement_plan
from .experiment_config import ConfigError, ExperimentConfig
from .generators import Corpus, generate_corpus, generate_model

logger = logging.getLogger(__name__)

SWEEP_HEADER = [
    "sigma",
    "temp_c",
    "method",
    "seed",
    "mse",
    "divergence",
    "mean_entropy",
    "underact_frac",
]
METRIC_NOTE = (
    "# metrics: mse and divergence compare final hidden states against clean "
    "inference and stand in for perplexity; sigma is the device noise actually used"
)
METHODS = ("clean", "vanilla", "romer")


def fmt(value) -> str:
    """Deterministic CSV cell text."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def point_tag(sigma: float, temp_c: Optional[float]) -> str:
    """File tag of a sweep point: ``t<temp>`` for temperatures, ``s<sigma>`` otherwise."""
    if temp_c is None:
        return f"s{sigma:g}"
    return f"t{temp_c:g}"


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    temp_c: Optional[float]
    method: str
    seed: object  # int, or "mean" on summary rows
    mse: float
    divergence: float
    mean_entropy: float
    underact_frac: float

    def cells(self) -> List[str]:
        return [
            fmt(self.sigma),
            fmt(self.temp_c),
            self.method,
            fmt(self.seed),
            fmt(self.mse),
            fmt(self.divergence),
            fmt(self.mean_entropy),
            fmt(self.underact_frac),
        ]


@dataclass
class SweepResult:
    """Per (point, method, seed) rows plus per-point summary means."""

    rows: List[SweepRow] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def select(self, method: str, sigma: Optional[float] = None) -> List[SweepRow]:
        return [
            r
            for r in self.rows
            if r.method == method and (sigma is None or r.sigma == sigma)
        ]

    def summary(self, method: str, sigma: float) -> SweepRow:
        for r in self.rows:
            if r.method == f"summary:{method}" and r.sigma == sigma:
                return r
        raise KeyError(f"no summary row for {method} at sigma={sigma}")

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(METRIC_NOTE + "\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(SWEEP_HEADER)
            for row in self.rows:
                writer.writerow(row.cells())
        logger.info(f"Sweep table written to {path}")
        return path


@dataclass
class RunOutcome:
    """Everything one (point, seed) cell produced."""

    vanilla_map: ActivationMap
    romer_map: ActivationMap
    plan: ReplacementPlan
    metrics: Dict[str, Tuple[float, float, float, float]]


def load_inputs(config: ExperimentConfig) -> Tuple[MoEModel, Corpus]:
    """Model and corpus per config (files when given, generated otherwise)."""
    try:
        model = MoEModel.load(config.model.path) if config.model.path else generate_model(config.model)
        corpus = (
            Corpus.load(config.corpus.path) if config.corpus.path else generate_corpus(config.corpus_spec)
        )
    except FileNotFoundError as e:
        raise ConfigError(f"input file not found: {e.filename}") from None
    if model.num_layers and corpus.tokens and corpus.tokens[0].shape[0] != model.hidden_dim:
        raise ConfigError(
            f"corpus token length {corpus.tokens[0].shape[0]} does not match model hidden dim "
            f"{model.hidden_dim}"
        )
    return model, corpus


def activation_of(trace, model: MoEModel) -> ActivationMap:
    return accumulate_activation(trace, model.num_layers, model.num_experts)


def metrics_of(clean_outputs, outputs, report: LoadBalanceReport) -> Tuple[float, float, float, float]:
    return (
        output_mse(clean_outputs, outputs),
        output_divergence(clean_outputs, outputs),
        report.mean_entropy,
        report.mean_underactivated_fraction,
    )


class Pipeline:
    """Shared state of one experiment: model, corpus and the clean reference."""

    def __init__(self, config: ExperimentConfig, model: MoEModel, corpus: Corpus):
        self.config = config
        self.model = model
        self.tokens = list(corpus.tokens)
        self.clean_outputs, clean_trace = model_forward(
            model, self.tokens, NoiseConfig.disabled(), config.seed
        )
        self.clean_trace = clean_trace
        self.clean_map = activation_of(clean_trace, model)
        self.clean_report = balance_report(self.clean_map)
        self._plans: Dict[int, ReplacementPlan] = {}

    def clean_plan(self, n: int) -> ReplacementPlan:
        if n not in self._plans:
            self._plans[n] = (
                build_replacement_plan(self.clean_map, n)
                if n > 0
                else ReplacementPlan.empty(self.model.num_layers)
            )
        return self._plans[n]

    def vanilla(self, cfg: NoiseConfig, seed: int):
        return model_forward(self.model, self.tokens, cfg, seed)

    def romer(self, cfg: NoiseConfig, calib: CalibrationConfig, seed: int, vanilla_trace=None):
        """ROMER forward; returns (outputs, trace, plan)."""
        n = calib.effective_n
        if n == 0:
            plan = ReplacementPlan.empty(self.model.num_layers)
        elif calib.profile_source == "noisy":
            if vanilla_trace is None:
                _, vanilla_trace = self.vanilla(cfg, seed)
            plan = build_replacement_plan(activation_of(vanilla_trace, self.model), n)
        else:
            plan = self.clean_plan(n)
        patched = apply_replacement(self.model, plan)
        outputs, trace = romer_model_forward(patched, plan, self.tokens, cfg, calib, seed)
        return outputs, trace, plan

    def run_cell(self, sigma: float, seed: int) -> RunOutcome:
        cfg = self.config.noise.with_sigma(sigma)
        v_out, v_trace = self.vanilla(cfg, seed)
        r_out, r_trace, plan = self.romer(cfg, self.config.calibration, seed, v_trace)
        v_map, r_map = activation_of(v_trace, self.model), activation_of(r_trace, self.model)
        metrics = {
            "clean": (0.0, 0.0, self.clean_report.mean_entropy,
                      self.clean_report.mean_underactivated_fraction),
            "vanilla": metrics_of(self.clean_outputs, v_out, balance_report(v_map)),
            "romer": metrics_of(self.clean_outputs, r_out, balance_report(r_map)),
        }
        return RunOutcome(v_map, r_map, plan, metrics)


def parallel_map(fn, jobs: Sequence, workers: int) -> List:
    """Run ``fn`` over ``jobs`` and return results in job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        futures = {i: pool.submit(fn, job) for i, job in enumerate(jobs)}
        return [futures[i].result() for i in range(len(jobs))]


def run_pipeline(
    config: ExperimentConfig,
    out_dir=None,
    *,
    points: Optional[Sequence[Tuple[float, Optional[float]]]] = None,
    workers: int = 1,
) -> SweepResult:
    """Clean, vanilla and ROMER inference at every noise point and seed.

    Writes ``sweep.csv``, heatmaps, balance reports, plans, ``metadata.json``
    and a ``manifest.json`` listing every file when ``out_dir`` is given.
    """
    model, corpus = load_inputs(config)
    points = list(points) if points is not None else config.sweep_points()
    seeds = config.trial_seeds()
    pipe = Pipeline(config, model, corpus)
    logger.info(
        f"Pipeline: {len(points)} noise points x {len(seeds)} seeds over {len(corpus)} tokens"
    )

    jobs = [(p, s) for p in range(len(points)) for s in range(len(seeds))]

    def job_fn(job):
        p, s = job
        outcome = pipe.run_cell(points[p][0], seeds[s])
        logger.debug(f"Finished cell sigma={points[p][0]} seed={seeds[s]}")
        return outcome

    outcomes = dict(zip(jobs, parallel_map(job_fn, jobs, workers)))

    result = SweepResult(seeds=seeds, config=config.to_dict())
    for p, (sigma, temp_c) in enumerate(points):
        for method in METHODS:
            for s, seed in enumerate(seeds):
                m = outcomes[(p, s)].metrics[method]
                result.rows.append(SweepRow(sigma, temp_c, method, seed, *m))
        for method in METHODS:
            values = np.array([outcomes[(p, s)].metrics[method] for s in range(len(seeds))])
            means = [float(v) for v in values.mean(axis=0)]
            result.rows.append(SweepRow(sigma, temp_c, f"summary:{method}", "mean", *means))

    if out_dir is not None:
        write_artifacts(Path(out_dir), config, pipe, points, outcomes, result)
    return result


def write_artifacts(out_dir: Path, config, pipe: Pipeline, points, outcomes, result: SweepResult) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = ["sweep.csv", "metadata.json", "manifest.json", "heatmap_clean.csv", "report_clean.json"]
    result.write_csv(out_dir / "sweep.csv")
    export_heatmap(pipe.clean_map, out_dir / "heatmap_clean.csv")
    write_report(pipe.clean_report.to_dict(), out_dir / "report_clean.json")
    for p, (sigma, temp_c) in enumerate(points):
        tag = point_tag(sigma, temp_c)
        first = outcomes[(p, 0)]
        for method, amap in (("vanilla", first.vanilla_map), ("romer", first.romer_map)):
            name = f"heatmap_{method}_{tag}.csv"
            export_heatmap(amap, out_dir / name)
            report = balance_report(amap).to_dict()
            report.update({"sigma": sigma, "temp_c": temp_c, "seed": result.seeds[0]})
            write_report(report, out_dir / f"report_{method}_{tag}.json")
            files += [name, f"report_{method}_{tag}.json"]
        first.plan.save(out_dir / f"plan_{tag}.json")
        files.append(f"plan_{tag}.json")

    metadata = {
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config": config.to_dict(),
        "points": [{"sigma": s, "temp_c": t, "tag": point_tag(s, t)} for s, t in points],
        "seeds": result.seeds,
        "metric_note": METRIC_NOTE.lstrip("# "),
    }
    with open(out_dir / "metadata.json", "w") as f:
        json.dump(metadata, f, indent=2)
        f.write("\n")
    with open(out_dir / "manifest.json", "w") as f:
        json.dump({"files": sorted(files)}, f, indent=2)
        f.write("\n")
    logger.info(f"Wrote {len(files)} files to {out_dir}")
