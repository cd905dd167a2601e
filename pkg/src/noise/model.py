"""Analog compute-in-memory perturbation of matrix-vector products.

A noisy product is ``(W + W*E) x + eps_adc`` with ``E_ij ~ N(0, sigma^2)``
and ``eps_adc ~ U(-step/2, step/2)`` per output. Device noise is either
redrawn on every call (``resample``) or fixed per physical location for a
deployment (``frozen``), which is how programming errors behave on a chip.
"""

import logging
from threading import Lock
from typing import Dict, Optional, Tuple

import numpy as np

from src.core.linalg import matvec
from src.core.rng import FROZEN_STREAM, RandomStream, location_id
from .specs import AdcSpec, DeviceNoiseSpec, NoiseConfig

logger = logging.getLogger(__name__)


def quantization_step(adc: AdcSpec) -> float:
    """ADC step ``v_ref / (2**bits - 1)``; the error is uniform on half a step either side."""
    return adc.v_ref / (2.0**adc.bits - 1.0)


def perturb_weights(w: np.ndarray, spec: DeviceNoiseSpec, rng: RandomStream) -> np.ndarray:
    """Multiplicative device noise: ``W * (1 + e)`` with fresh draws.

    Zero weights stay zero. With ``sigma_dev == 0`` a bit-identical copy is
    returned and no draws are consumed.
    """
    if spec.sigma_dev == 0.0:
        return np.array(w, dtype=np.float64)
    e = rng.normal(size=w.shape, scale=spec.sigma_dev)
    return w * (1.0 + e)


def apply_adc(y: np.ndarray, adc: AdcSpec, rng: RandomStream) -> np.ndarray:
    """Add independent uniform quantization error to every output."""
    if not adc.enabled:
        return np.array(y, dtype=np.float64)
    half = quantization_step(adc) / 2.0
    return y + rng.uniform(-half, half, size=np.shape(y))


class FrozenNoiseCache:
    """Per-deployment standard-normal draws keyed by physical location.

    A location keeps its realization for the whole deployment, so weights
    copied into another location pick up that location's own noise. Safe to
    share between worker threads; draws depend only on (seed, location).
    """

    def __init__(self, deployment_seed: int):
        self.deployment_seed = int(deployment_seed)
        self._draws: Dict[Tuple[str, Tuple[int, ...]], np.ndarray] = {}
        self._lock = Lock()

    def standard_normals(self, location: str, shape: Tuple[int, ...]) -> np.ndarray:
        key = (location, tuple(shape))
        with self._lock:
            draws = self._draws.get(key)
            if draws is None:
                stream = RandomStream(
                    self.deployment_seed, (FROZEN_STREAM, location_id(location))
                )
                draws = stream.standard_normal(shape)
                draws.setflags(write=False)
                self._draws[key] = draws
                logger.debug(f"Materialized frozen noise for {location} {shape}")
            return draws

    def perturbed(self, w: np.ndarray, spec: DeviceNoiseSpec, location: str) -> np.ndarray:
        if spec.sigma_dev == 0.0:
            return np.array(w, dtype=np.float64)
        z = self.standard_normals(location, w.shape)
        return w * (1.0 + spec.sigma_dev * z)

    def __len__(self) -> int:
        with self._lock:
            return len(self._draws)


def noisy_matvec(
    w: np.ndarray,
    x: np.ndarray,
    cfg: NoiseConfig,
    rng: RandomStream,
    *,
    location: str = "array",
    frozen: Optional[FrozenNoiseCache] = None,
) -> np.ndarray:
    """``perturb_weights`` then ``matvec`` then ``apply_adc``.

    Args:
        w: Nominal weights stored at ``location``.
        x: Input vector.
        cfg: Noise model. A disabled config reproduces ``matvec`` exactly.
        rng: Caller-owned stream for resampled device noise and ADC noise.
        location: Physical location name, used to key frozen noise.
        frozen: Deployment cache, required when ``cfg.noise_mode == "frozen"``
            and device noise is on.

    Raises:
        ValueError: on dimension mismatch or a missing frozen cache.
    """
    if w.shape[1] != x.shape[0]:
        raise ValueError(
            f"dimension mismatch: W has {w.shape[1]} cols but x has length {x.shape[0]}"
        )
    if cfg.device.sigma_dev == 0.0:
        w_noisy = w
    elif cfg.noise_mode == "frozen":
        if frozen is None:
            raise ValueError("frozen noise mode needs a FrozenNoiseCache for the deployment")
        w_noisy = frozen.perturbed(w, cfg.device, location)
    else:
        w_noisy = perturb_weights(w, cfg.device, rng)
    return apply_adc(matvec(w_noisy, x), cfg.adc, rng)
