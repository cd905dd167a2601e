"""ROMER calibration: expert replacement and percentile-based router calibration."""

from .plan import (
    LayerPlan,
    ReplacementPlan,
    apply_replacement,
    build_replacement_plan,
    plan_layer,
)
from .calibration import (
    CalibrationConfig,
    adjust_logits,
    calibrate_logits,
    contraction_holds,
    contraction_violation_rate,
)
from .pipeline import (
    duplicated_expert_forward,
    romer_layer_forward,
    romer_model_forward,
    routed_logits,
)

__all__ = [
    "LayerPlan",
    "ReplacementPlan",
    "apply_replacement",
    "build_replacement_plan",
    "plan_layer",
    "CalibrationConfig",
    "adjust_logits",
    "calibrate_logits",
    "contraction_holds",
    "contraction_violation_rate",
    "duplicated_expert_forward",
    "romer_layer_forward",
    "romer_model_forward",
    "routed_logits",
]
