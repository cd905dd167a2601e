"""Command-line entry point: ``python main.py <subcommand> [options]``."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from src.config import SimConfig
from src.moe.model import MoEModel, model_forward
from src.profiler.activation import accumulate_activation
from src.profiler.balance import balance_report
from src.profiler.export import export_heatmap, write_report
from src.profiler.spread import logit_spread
from src.noise.specs import NoiseConfig
from src.romer.plan import ReplacementPlan, apply_replacement, build_replacement_plan
from .ablation import ablation_grid
from .experiment_config import ConfigError, ExperimentConfig, apply_overrides
from .generators import generate_corpus, generate_model
from .oracle import permutation_oracle
from .runner import load_inputs, run_pipeline
from .selftest import run_selftest
from .toy_lm import ToyLMSpec, evaluate_toy, train_toy

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "generate-model",
    "generate-corpus",
    "profile",
    "plan",
    "apply",
    "run",
    "sweep",
    "ablate",
    "oracle",
    "selftest",
    "train-toy",
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted config override, e.g. noise.device.sigma_dev=0.05",
    )

    parser = argparse.ArgumentParser(
        prog="romer-sim",
        description="Analog CIM noise simulator and ROMER calibration for toy MoE models.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    helps = {
        "generate-model": "generate a synthetic model file",
        "generate-corpus": "generate a synthetic token corpus",
        "profile": "clean (and optional noisy) activation profile",
        "plan": "build a replacement plan from a profile",
        "apply": "apply a replacement plan to a model",
        "run": "pipeline at the configured noise sigma",
        "sweep": "pipeline over the temperature/sigma sweep",
        "ablate": "n / lambda ablation grid",
        "oracle": "permutation oracle for the replacement heuristic",
        "selftest": "fast invariant checks",
        "train-toy": "train a toy LM and report perplexities",
    }
    parsers = {name: sub.add_parser(name, parents=[common], help=helps[name]) for name in SUBCOMMANDS}
    parsers["profile"].add_argument(
        "--noisy", action="store_true", help="also profile at the configured sigma"
    )
    parsers["apply"].add_argument("--plan", help="plan file (default: build from a clean profile)")
    return parser


def resolve_config(args, sim: Optional[SimConfig] = None) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.load(args.config, args.override)
    else:
        config = ExperimentConfig.from_dict(apply_overrides({}, args.override))
    if args.seed is not None:
        config.seed = int(args.seed)
    if args.out:
        config.output_dir = args.out
    elif sim is not None and config.output_dir == "results":
        config.output_dir = sim.output_dir
    return config


def cmd_generate_model(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    generate_model(config.model).save(out / "model.json")
    return 0


def cmd_generate_corpus(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    generate_corpus(config.corpus_spec).save(out / "corpus.json")
    return 0


def cmd_profile(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    model, corpus = load_inputs(config)
    tokens = list(corpus.tokens)
    _, clean_trace = model_forward(
        model, tokens, NoiseConfig.disabled(), config.seed, workers=sim.worker_count
    )
    clean_map = accumulate_activation(clean_trace, model.num_layers, model.num_experts)
    export_heatmap(clean_map, out / "heatmap_clean.csv")
    write_report(balance_report(clean_map).to_dict(), out / "report_clean.json")
    if args.noisy:
        cfg = config.noise
        _, noisy_trace = model_forward(model, tokens, cfg, config.seed, workers=sim.worker_count)
        noisy_map = accumulate_activation(noisy_trace, model.num_layers, model.num_experts)
        export_heatmap(noisy_map, out / "heatmap_noisy.csv")
        report = balance_report(noisy_map).to_dict()
        report["sigma"] = cfg.device.sigma_dev
        write_report(report, out / "report_noisy.json")
        spread = logit_spread(clean_trace, noisy_trace).to_dict()
        spread["sigma"] = cfg.device.sigma_dev
        write_report(spread, out / "logit_spread.json")
    return 0


def _profile_plan(config: ExperimentConfig, model: MoEModel, tokens, sim: SimConfig) -> ReplacementPlan:
    cfg = NoiseConfig.disabled() if config.calibration.profile_source == "clean" else config.noise
    _, trace = model_forward(model, tokens, cfg, config.seed, workers=sim.worker_count)
    amap = accumulate_activation(trace, model.num_layers, model.num_experts)
    return build_replacement_plan(amap, config.calibration.n)


def cmd_plan(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    model, corpus = load_inputs(config)
    _profile_plan(config, model, list(corpus.tokens), sim).save(out / "plan.json")
    return 0


def cmd_apply(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    model, corpus = load_inputs(config)
    if args.plan:
        if not Path(args.plan).is_file():
            raise ConfigError(f"plan file not found: {args.plan}")
        plan = ReplacementPlan.load(args.plan)
    else:
        plan = _profile_plan(config, model, list(corpus.tokens), sim)
        plan.save(out / "plan.json")
    apply_replacement(model, plan).save(out / "model_patched.json")
    return 0


def cmd_run(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    points = [(config.noise.device.sigma_dev, None)]
    run_pipeline(config, out, points=points, workers=sim.worker_count)
    return 0


def cmd_sweep(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    run_pipeline(config, out, workers=sim.worker_count)
    return 0


def cmd_ablate(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    ablation_grid(config, workers=sim.worker_count).write_csv(out / "ablation.csv")
    return 0


def cmd_oracle(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    model, corpus = load_inputs(config)
    tokens = list(corpus.tokens)
    clean_outputs, clean_trace = model_forward(model, tokens, NoiseConfig.disabled(), config.seed)
    amap = accumulate_activation(clean_trace, model.num_layers, model.num_experts)
    spec = config.oracle
    report = permutation_oracle(
        model,
        amap,
        spec.n,
        config.noise.with_sigma(spec.sigma),
        config.trials,
        tokens=tokens,
        clean_outputs=clean_outputs,
        seed=config.seed,
        lam=spec.lam,
        random_set_count=spec.random_sets,
        max_bijections=spec.max_bijections,
        sample_bijections=spec.sample_bijections,
        calibration=config.calibration,
    )
    write_report(report.to_dict(), out / "oracle.json")
    print(
        f"heuristic plan rank {report.heuristic_rank}/{report.total} "
        f"(percentile {report.heuristic_percentile:.2f})"
    )
    return 0


def cmd_selftest(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'ok  ' if ok else 'FAIL'} {name}{'' if ok else ': ' + detail}")
    failed = sum(1 for _, ok, _ in results if not ok)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def toy_spec(config: ExperimentConfig) -> ToyLMSpec:
    """Toy LM settings at the configured device sigma."""
    return ToyLMSpec(sigma=config.noise.device.sigma_dev)


def cmd_train_toy(config: ExperimentConfig, out: Path, args, sim: SimConfig) -> int:
    spec = toy_spec(config)
    lm, losses = train_toy(spec, config.seed)
    result = evaluate_toy(spec, lm, config.seed)
    result["train_loss"] = losses
    result["spec"] = spec.to_dict()
    write_report(result, out / "toy_lm.json")
    print(
        f"perplexity clean={result['clean']:.3f} vanilla={result['vanilla']:.3f} "
        f"romer={result['romer']:.3f} (sigma={result['sigma']})"
    )
    return 0


COMMANDS = {
    "generate-model": cmd_generate_model,
    "generate-corpus": cmd_generate_corpus,
    "profile": cmd_profile,
    "plan": cmd_plan,
    "apply": cmd_apply,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
    "oracle": cmd_oracle,
    "selftest": cmd_selftest,
    "train-toy": cmd_train_toy,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code.

    0 on success, 1 on configuration or runtime errors, 2 on usage errors.
    """
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2

    sim = SimConfig.from_env()
    try:
        config = resolve_config(args, sim)
        out = Path(config.output_dir)
        if args.command != "selftest":
            out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](config, out, args, sim)
    except (ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
