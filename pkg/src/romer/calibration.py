"""Router logit calibration and replacement-aware logit adjustment."""

from dataclasses import asdict, dataclass

import numpy as np

from src.core.stats import iqr
from .plan import LayerPlan

BOTTOM_MODES = ("mask", "literal-zero")
ORDERS = ("calibrate-first", "adjust-first")
PROFILE_SOURCES = ("clean", "noisy")
LAMBDA_MAX = 0.5
LAMBDA_MAX_EXTENDED = 1.0


def check_lambda(lam: float, extended: bool = False) -> float:
    """Validate a calibration strength and return it as a float.

    Raises:
        ValueError: if lam is outside [0, 0.5), or [0, 1] when ``extended``.
    """
    lam = float(lam)
    if extended:
        if not 0.0 <= lam <= LAMBDA_MAX_EXTENDED:
            raise ValueError(f"lambda must be in [0, 1] in extended mode, got {lam}")
    elif not 0.0 <= lam < LAMBDA_MAX:
        raise ValueError(f"lambda must be in [0, 0.5), got {lam} (enable extended_lambda for [0, 1])")
    return lam


@dataclass
class CalibrationConfig:
    """Settings of the ROMER inference pipeline."""

    lam: float = 0.4
    n: int = 2
    bottom_mode: str = "mask"  # mask | literal-zero
    replacement: bool = True
    calibration: bool = True
    halve_top_logits: bool = True
    order: str = "calibrate-first"  # calibrate-first | adjust-first
    extended_lambda: bool = False
    profile_source: str = "clean"  # clean | noisy

    def __post_init__(self) -> None:
        self.lam = check_lambda(self.lam, self.extended_lambda)
        self.n = int(self.n)
        if self.n < 0:
            raise ValueError(f"replacement count n must be >= 0, got {self.n}")
        if self.bottom_mode not in BOTTOM_MODES:
            raise ValueError(f"bottom_mode must be one of {BOTTOM_MODES}, got {self.bottom_mode!r}")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}, got {self.order!r}")
        if self.profile_source not in PROFILE_SOURCES:
            raise ValueError(
                f"profile_source must be one of {PROFILE_SOURCES}, got {self.profile_source!r}"
            )

    @property
    def effective_lam(self) -> float:
        return self.lam if self.calibration else 0.0

    @property
    def effective_n(self) -> int:
        return self.n if self.replacement else 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown calibration keys: {sorted(unknown)}")
        return cls(**d)


def calibrate_logits(z: np.ndarray, lam: float, extended: bool = False) -> np.ndarray:
    """Pull the sorted halves of ``z`` toward each other by ``lam * IQR(z)``.

    The lower floor(E/2) sorted values move up, the rest move down, and the
    result is put back in the original expert order. Masked (-inf) entries
    are left alone and excluded from the statistics.
    """
    lam = check_lambda(lam, extended)
    z = np.asarray(z, dtype=np.float64)
    if z.size < 2:
        raise ValueError(f"calibration needs at least 2 logits, got {z.size}")
    out = z.copy()
    if lam == 0.0:
        return out
    live = np.flatnonzero(np.isfinite(z))
    if live.size < 2:
        return out
    values = z[live]
    order = np.argsort(values, kind="stable")
    shifted = values[order]
    shift = lam * iqr(values)
    half = values.size // 2
    shifted[:half] += shift
    shifted[half:] -= shift
    out[live[order]] = shifted
    return out



def contraction_holds(z: np.ndarray, lam: float, extended: bool = False, rtol: float = 1e-12) -> bool:
    """Whether calibration scaled the IQR of the finite logits by exactly ``|1 - 2 lam|``.

    Holds whenever the shifted halves keep their order; logits whose middle
    gap is narrower than ``2 lam * IQR`` can break it.
    """
    z = np.asarray(z, dtype=np.float64)
    live = np.isfinite(z)
    expected = abs(1.0 - 2.0 * lam) * iqr(z[live])
    got = iqr(calibrate_logits(z, lam, extended)[live])
    return abs(got - expected) <= rtol * abs(expected) if expected else got == 0.0


def contraction_violation_rate(vectors, lam: float, extended: bool = False) -> float:
    """Fraction of logit vectors on which ``contraction_holds`` fails."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("no logit vectors given")
    failures = sum(1 for z in vectors if not contraction_holds(z, lam, extended))
    return failures / len(vectors)


def adjust_logits(
    z: np.ndarray,
    layer_plan: LayerPlan,
    mode: str = "mask",
    halve_top: bool = True,
) -> np.ndarray:
    """Halve top-set logits; mask (-inf) or zero bottom-set logits."""
    if mode not in BOTTOM_MODES:
        raise ValueError(f"bottom mode must be one of {BOTTOM_MODES}, got {mode!r}")
    out = np.array(z, dtype=np.float64)
    if layer_plan.n == 0:
        return out
    layer_plan.validate(out.size)
    if halve_top:
        for i in layer_plan.top:
            out[i] = out[i] / 2.0
    fill = -np.inf if mode == "mask" else 0.0
    for i in layer_plan.bottom:
        out[i] = fill
    return out
