"""Hardware noise configuration objects.

Nested dataclasses with ``__post_init__`` validation and ``to_dict``/
``from_dict`` so they can live inside the JSON experiment config.
"""

from dataclasses import asdict, dataclass, field
from typing import List, Tuple

NOISE_MODES = ("frozen", "resample")

# Default sigma per temperature. Result tables echo the sigma used at each point.
DEFAULT_TEMPERATURE_POINTS: List[Tuple[float, float]] = [
    (25.0, 0.02),
    (45.0, 0.04),
    (65.0, 0.07),
    (80.0, 0.10),
    (85.0, 0.12),
]


def _pick(d: dict, cls) -> dict:
    allowed = set(cls.__dataclass_fields__)
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return {k: v for k, v in d.items() if k in allowed}


@dataclass
class DeviceNoiseSpec:
    """Relative conductance error of stored weights."""

    sigma_dev: float = 0.0

    def __post_init__(self) -> None:
        self.sigma_dev = float(self.sigma_dev)
        if self.sigma_dev < 0:
            raise ValueError(f"sigma_dev must be >= 0, got {self.sigma_dev}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceNoiseSpec":
        return cls(**_pick(d, cls))


@dataclass
class AdcSpec:
    """ADC digitization of analog MVM outputs.

    ``v_ref`` is read as the full-scale output range; no clipping is modeled.
    """

    v_ref: float = 1.0
    bits: int = 8
    enabled: bool = True

    def __post_init__(self) -> None:
        self.v_ref = float(self.v_ref)
        self.bits = int(self.bits)
        self.enabled = bool(self.enabled)
        if self.bits < 1:
            raise ValueError(f"ADC bits must be >= 1, got {self.bits}")
        if self.v_ref <= 0:
            raise ValueError(f"ADC v_ref must be > 0, got {self.v_ref}")

    @property
    def step(self) -> float:
        """Quantization step v_ref / (2^bits - 1)."""
        return self.v_ref / (2.0**self.bits - 1.0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AdcSpec":
        return cls(**_pick(d, cls))


@dataclass
class NoiseConfig:
    """Composite analog noise model ``(W + W*E) x + eps_adc``."""

    device: DeviceNoiseSpec = field(default_factory=DeviceNoiseSpec)
    adc: AdcSpec = field(default_factory=AdcSpec)
    perturb_router: bool = True
    perturb_experts: bool = True
    noise_mode: str = "frozen"  # frozen | resample

    def __post_init__(self) -> None:
        if isinstance(self.device, dict):
            self.device = DeviceNoiseSpec.from_dict(self.device)
        if isinstance(self.adc, dict):
            self.adc = AdcSpec.from_dict(self.adc)
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(
                f"noise_mode must be one of {NOISE_MODES}, got {self.noise_mode!r}"
            )

    @classmethod
    def disabled(cls) -> "NoiseConfig":
        """Config that reproduces clean inference bit-exactly."""
        return cls(
            device=DeviceNoiseSpec(0.0),
            adc=AdcSpec(enabled=False),
            perturb_router=False,
            perturb_experts=False,
        )

    @property
    def is_disabled(self) -> bool:
        if not (self.perturb_router or self.perturb_experts):
            return True
        return self.device.sigma_dev == 0.0 and not self.adc.enabled

    def with_sigma(self, sigma_dev: float) -> "NoiseConfig":
        """Copy with a different device sigma, other settings kept."""
        return NoiseConfig(
            device=DeviceNoiseSpec(sigma_dev),
            adc=AdcSpec(**self.adc.to_dict()),
            perturb_router=self.perturb_router,
            perturb_experts=self.perturb_experts,
            noise_mode=self.noise_mode,
        )

    def to_dict(self) -> dict:
        return {
            "device": self.device.to_dict(),
            "adc": self.adc.to_dict(),
            "perturb_router": self.perturb_router,
            "perturb_experts": self.perturb_experts,
            "noise_mode": self.noise_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseConfig":
        d = _pick(d, cls)
        return cls(
            device=DeviceNoiseSpec.from_dict(d.get("device", {})),
            adc=AdcSpec.from_dict(d.get("adc", {})),
            perturb_router=bool(d.get("perturb_router", True)),
            perturb_experts=bool(d.get("perturb_experts", True)),
            noise_mode=d.get("noise_mode", "frozen"),
        )


@dataclass
class TemperatureProfile:
    """Ordered (temperature_c, sigma_dev) pairs."""

    points: List[Tuple[float, float]] = field(
        default_factory=lambda: list(DEFAULT_TEMPERATURE_POINTS)
    )

    def __post_init__(self) -> None:
        self.points = [(float(t), float(s)) for t, s in self.points]
        if not self.points:
            raise ValueError("temperature profile needs at least one point")
        for (t0, s0), (t1, s1) in zip(self.points, self.points[1:]):
            if t1 <= t0:
                raise ValueError(f"temperatures must be strictly increasing ({t0} -> {t1})")
            if s1 < s0:
                raise ValueError(
                    f"sigma_dev must be non-decreasing in temperature ({s0} at {t0}C, {s1} at {t1}C)"
                )
        if any(s < 0 for _, s in self.points):
            raise ValueError("sigma_dev values must be >= 0")

    @property
    def temperatures(self) -> List[float]:
        return [t for t, _ in self.points]

    def sigma_at(self, temp_c: float) -> float:
        """Sigma at a temperature; linear between points, clamped at the ends."""
        temp_c = float(temp_c)
        if temp_c <= self.points[0][0]:
            return self.points[0][1]
        if temp_c >= self.points[-1][0]:
            return self.points[-1][1]
        for (t0, s0), (t1, s1) in zip(self.points, self.points[1:]):
            if temp_c == t0:
                return s0
            if t0 < temp_c < t1:
                return s0 + (temp_c - t0) / (t1 - t0) * (s1 - s0)
        return self.points[-1][1]

    def to_dict(self) -> dict:
        return {"points": [[t, s] for t, s in self.points]}

    @classmethod
    def from_dict(cls, d: dict) -> "TemperatureProfile":
        d = _pick(d, cls)
        return cls(points=[tuple(p) for p in d.get("points", DEFAULT_TEMPERATURE_POINTS)])
