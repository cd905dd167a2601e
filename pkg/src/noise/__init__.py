"""Analog CIM noise model: device noise, ADC quantization, temperature profile."""

from .specs import AdcSpec, DeviceNoiseSpec, NoiseConfig, TemperatureProfile
from .model import (
    FrozenNoiseCache,
    apply_adc,
    noisy_matvec,
    perturb_weights,
    quantization_step,
)

__all__ = [
    "AdcSpec",
    "DeviceNoiseSpec",
    "NoiseConfig",
    "TemperatureProfile",
    "FrozenNoiseCache",
    "apply_adc",
    "noisy_matvec",
    "perturb_weights",
    "quantization_step",
]
