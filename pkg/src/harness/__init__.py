"""Experiment harness: generators, pipeline runs, ablations, oracle and CLI."""

from .experiment_config import (
    AblationSpec,
    ConfigError,
    CorpusSpec,
    ExperimentConfig,
    ModelSpec,
    OracleSpec,
    SweepSpec,
    apply_overrides,
)
from .generators import Corpus, cluster_geometry, generate_corpus, generate_model
from .runner import SWEEP_HEADER, SweepResult, SweepRow, run_pipeline
from .ablation import ABLATION_HEADER, AblationResult, ablation_grid
from .oracle import OracleBudgetError, OracleReport, permutation_oracle
from .cli import cli_main

__all__ = [
    "AblationSpec",
    "ConfigError",
    "CorpusSpec",
    "ExperimentConfig",
    "ModelSpec",
    "OracleSpec",
    "SweepSpec",
    "apply_overrides",
    "Corpus",
    "cluster_geometry",
    "generate_corpus",
    "generate_model",
    "SWEEP_HEADER",
    "SweepResult",
    "SweepRow",
    "run_pipeline",
    "ABLATION_HEADER",
    "AblationResult",
    "ablation_grid",
    "OracleBudgetError",
    "OracleReport",
    "permutation_oracle",
    "cli_main",
]
