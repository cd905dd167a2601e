"""Experiment configuration with nested sections and boundary checks.

The on-disk format is a JSON document with one object per section::

    {"model": {...}, "corpus": {...}, "noise": {...}, "temperatures": {...},
     "sweep": {...}, "calibration": {...}, "ablation": {...}, "oracle": {...},
     "trials": 5, "seed": 0, "output_dir": "results"}

Missing sections take their defaults; unknown keys are rejected.
"""

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src.noise.specs import DeviceNoiseSpec, NoiseConfig, TemperatureProfile
from src.romer.calibration import CalibrationConfig, check_lambda

MODEL_MODES = ("specialized", "random")

# Device sigma of an experiment when the noise section does not set one.
DEFAULT_SIGMA_DEV = 0.1


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


def _known(d: dict, cls, section: str) -> dict:
    unknown = set(d) - set(cls.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    return dict(d)


def _positive(name: str, value: int) -> int:
    value = int(value)
    if value <= 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


@dataclass
class ModelSpec:
    """Synthetic model generator settings (or a model file path)."""

    path: Optional[str] = None
    mode: str = "specialized"  # specialized | random
    num_layers: int = 8
    num_experts: int = 16
    k: int = 2
    hidden_dim: int = 32
    inner_dim: int = 64
    clusters: int = 7
    router_gain: float = 20.0
    jitter: float = 0.05
    activation: str = "silu"
    residual: bool = True
    renormalize: bool = False
    seed: int = 7
    cluster_seed: int = 1234

    def __post_init__(self) -> None:
        if self.mode not in MODEL_MODES:
            raise ConfigError(f"model.mode must be one of {MODEL_MODES}, got {self.mode!r}")
        self.num_layers = int(self.num_layers)
        if self.num_layers < 0:
            raise ConfigError(f"model.num_layers must be >= 0, got {self.num_layers}")
        self.num_experts = _positive("model.num_experts", self.num_experts)
        self.k = _positive("model.k", self.k)
        self.hidden_dim = _positive("model.hidden_dim", self.hidden_dim)
        self.inner_dim = _positive("model.inner_dim", self.inner_dim)
        self.clusters = _positive("model.clusters", self.clusters)
        self.router_gain = float(self.router_gain)
        self.jitter = float(self.jitter)
        if self.k > self.num_experts:
            raise ConfigError(
                f"model.k = {self.k} exceeds model.num_experts = {self.num_experts}"
            )
        if self.mode == "specialized":
            if 2 * self.clusters > self.num_experts:
                raise ConfigError(
                    f"specialized model needs 2 * clusters <= num_experts "
                    f"({2 * self.clusters} > {self.num_experts})"
                )
            if self.clusters + 2 > self.hidden_dim:
                raise ConfigError(
                    f"specialized model needs clusters + 2 <= hidden_dim "
                    f"({self.clusters + 2} > {self.hidden_dim})"
                )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**_known(d, cls, "model"))


@dataclass
class CorpusSpec:
    """Calibration/evaluation corpus around the model's cluster centroids.

    ``hidden_dim``, ``clusters``, ``cluster_seed`` and ``mode`` default to the
    model section's values so tokens and router rows share centroids.
    """

    tokens: int = 1024
    spread: float = 0.1
    seed: int = 11
    path: Optional[str] = None
    hidden_dim: Optional[int] = None
    clusters: Optional[int] = None
    cluster_seed: Optional[int] = None
    mode: Optional[str] = None

    def __post_init__(self) -> None:
        self.tokens = int(self.tokens)
        if self.tokens < 0:
            raise ConfigError(f"corpus.tokens must be >= 0, got {self.tokens}")
        self.spread = float(self.spread)
        if self.spread < 0:
            raise ConfigError(f"corpus.spread must be >= 0, got {self.spread}")
        if self.mode is not None and self.mode not in MODEL_MODES:
            raise ConfigError(f"corpus.mode must be one of {MODEL_MODES}, got {self.mode!r}")

    def resolved(self, model: ModelSpec) -> "CorpusSpec":
        return CorpusSpec(
            tokens=self.tokens,
            spread=self.spread,
            seed=self.seed,
            path=self.path,
            hidden_dim=self.hidden_dim if self.hidden_dim is not None else model.hidden_dim,
            clusters=self.clusters if self.clusters is not None else model.clusters,
            cluster_seed=self.cluster_seed if self.cluster_seed is not None else model.cluster_seed,
            mode=self.mode if self.mode is not None else model.mode,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSpec":
        return cls(**_known(d, cls, "corpus"))


@dataclass
class SweepSpec:
    """Noise points: temperatures resolved through the profile, plus raw sigmas."""

    temperatures: List[float] = field(default_factory=lambda: [25.0, 45.0, 65.0, 80.0, 85.0])
    sigmas: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.temperatures = [float(t) for t in self.temperatures]
        self.sigmas = [float(s) for s in self.sigmas]
        if len(set(self.temperatures)) != len(self.temperatures):
            raise ConfigError("sweep.temperatures contains duplicates")
        if len(set(self.sigmas)) != len(self.sigmas):
            raise ConfigError("sweep.sigmas contains duplicates")
        if any(s < 0 for s in self.sigmas):
            raise ConfigError("sweep.sigmas must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        return cls(**_known(d, cls, "sweep"))


@dataclass
class AblationSpec:
    n_values: List[int] = field(default_factory=lambda: [0, 2, 4, 8])
    lambda_values: List[float] = field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    temperatures: List[float] = field(default_factory=lambda: [25.0, 45.0, 65.0, 85.0])
    sigmas: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.n_values = [int(n) for n in self.n_values]
        if any(n < 0 for n in self.n_values):
            raise ConfigError("ablation.n_values must be >= 0")
        try:
            self.lambda_values = [check_lambda(lam, extended=True) for lam in self.lambda_values]
        except ValueError as e:
            raise ConfigError(f"ablation.lambda_values: {e}") from None
        self.temperatures = [float(t) for t in self.temperatures]
        self.sigmas = [float(s) for s in self.sigmas]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AblationSpec":
        return cls(**_known(d, cls, "ablation"))


@dataclass
class OracleSpec:
    """Permutation oracle: replacement-only by default (lam = 0)."""

    n: int = 2
    sigma: float = 0.1
    lam: float = 0.0
    random_sets: int = 8
    max_bijections: int = 24
    sample_bijections: Optional[int] = None

    def __post_init__(self) -> None:
        self.n = int(self.n)
        if self.n < 1:
            raise ConfigError(f"oracle.n must be >= 1, got {self.n}")
        self.sigma = float(self.sigma)
        self.random_sets = int(self.random_sets)
        if self.random_sets < 0:
            raise ConfigError("oracle.random_sets must be >= 0")
        self.max_bijections = _positive("oracle.max_bijections", self.max_bijections)
        if self.sample_bijections is not None:
            self.sample_bijections = _positive("oracle.sample_bijections", self.sample_bijections)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "OracleSpec":
        return cls(**_known(d, cls, "oracle"))


def default_noise() -> NoiseConfig:
    return NoiseConfig(device=DeviceNoiseSpec(DEFAULT_SIGMA_DEV))


def noise_from_dict(d: dict) -> NoiseConfig:
    """Noise section with the experiment default sigma filled in when absent."""
    d = copy.deepcopy(d)
    if isinstance(d, dict):
        device = d.setdefault("device", {})
        if isinstance(device, dict):
            device.setdefault("sigma_dev", DEFAULT_SIGMA_DEV)
    return NoiseConfig.from_dict(d)


@dataclass
class ExperimentConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    corpus: CorpusSpec = field(default_factory=CorpusSpec)
    noise: NoiseConfig = field(default_factory=default_noise)
    temperatures: TemperatureProfile = field(default_factory=TemperatureProfile)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    ablation: AblationSpec = field(default_factory=AblationSpec)
    oracle: OracleSpec = field(default_factory=OracleSpec)
    trials: int = 5
    seed: int = 0
    output_dir: str = "results"

    def __post_init__(self) -> None:
        self.trials = _positive("trials", self.trials)
        self.seed = int(self.seed)
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.model.path is not None and not Path(self.model.path).exists():
            raise ConfigError(f"model file not found: {self.model.path}")
        if self.corpus.path is not None and not Path(self.corpus.path).exists():
            raise ConfigError(f"corpus file not found: {self.corpus.path}")

    @property
    def corpus_spec(self) -> CorpusSpec:
        return self.corpus.resolved(self.model)

    def trial_seeds(self) -> List[int]:
        return [self.seed + j for j in range(self.trials)]

    def sweep_points(self) -> List[Tuple[float, Optional[float]]]:
        """(sigma, temp_c) for every sweep point; temp_c is None for raw sigmas."""
        points = [(self.temperatures.sigma_at(t), t) for t in self.sweep.temperatures]
        points += [(s, None) for s in self.sweep.sigmas]
        return points

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "corpus": self.corpus.to_dict(),
            "noise": self.noise.to_dict(),
            "temperatures": self.temperatures.to_dict(),
            "sweep": self.sweep.to_dict(),
            "calibration": self.calibration.to_dict(),
            "ablation": self.ablation.to_dict(),
            "oracle": self.oracle.to_dict(),
            "trials": self.trials,
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = _known(d, cls, "config")
        try:
            return cls(
                model=ModelSpec.from_dict(d.get("model", {})),
                corpus=CorpusSpec.from_dict(d.get("corpus", {})),
                noise=noise_from_dict(d.get("noise", {})),
                temperatures=TemperatureProfile.from_dict(d.get("temperatures", {})),
                sweep=SweepSpec.from_dict(d.get("sweep", {})),
                calibration=CalibrationConfig.from_dict(d.get("calibration", {})),
                ablation=AblationSpec.from_dict(d.get("ablation", {})),
                oracle=OracleSpec.from_dict(d.get("oracle", {})),
                trials=d.get("trials", 5),
                seed=d.get("seed", 0),
                output_dir=d.get("output_dir", "results"),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid configuration: {e}") from None

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path, overrides: Sequence[str] = ()) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(apply_overrides(data, overrides))


def parse_override(item: str) -> Tuple[List[str], Any]:
    """Split ``a.b.c=value``; the value is JSON when it parses, else a string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    keys = [k for k in key.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return keys, value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Return a copy of ``data`` with dotted-path overrides applied."""
    data = copy.deepcopy(data)
    for item in overrides:
        keys, value = parse_override(item)
        node = data
        for k in keys[:-1]:
            child = node.get(k)
            if child is None:
                child = {}
                node[k] = child
            elif not isinstance(child, dict):
                raise ConfigError(f"override {item!r}: {k!r} is not a section")
            node = child
        node[keys[-1]] = value
    return data
