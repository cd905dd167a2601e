"""ROMER inference: calibrated routing plus duplicated expert computation."""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.rng import RandomStream
from src.moe.expert import ExpertFFN, expert_forward, expert_location
from src.moe.layer import MoELayer, router_logits, select_and_gate
from src.moe.model import MoEModel, run_tokens
from src.moe.trace import RoutingEvent, RoutingTrace
from src.noise.model import FrozenNoiseCache
from src.noise.specs import NoiseConfig
from .calibration import CalibrationConfig, adjust_logits, calibrate_logits
from .plan import LayerPlan, ReplacementPlan

logger = logging.getLogger(__name__)


def duplicated_expert_forward(
    expert_orig: ExpertFFN,
    expert_copy: ExpertFFN,
    x: np.ndarray,
    gate: float,
    cfg: NoiseConfig,
    rng: RandomStream,
    *,
    locations: Tuple[str, str] = ("orig", "copy"),
    frozen: Optional[FrozenNoiseCache] = None,
) -> np.ndarray:
    """``(gate / 2) * (f_orig(x) + f_copy(x))`` over two independently noisy slots.

    Raises:
        ValueError: "replacement not applied" if the two slots hold different
            nominal weights.
    """
    if not expert_orig.same_weights(expert_copy):
        raise ValueError("replacement not applied: duplicated slots hold different weights")
    fa = expert_forward(expert_orig, x, cfg, rng, location=locations[0], frozen=frozen)
    fb = expert_forward(expert_copy, x, cfg, rng, location=locations[1], frozen=frozen)
    return (gate / 2.0) * (fa + fb)


def routed_logits(z: np.ndarray, layer_plan: LayerPlan, calib: CalibrationConfig) -> np.ndarray:
    """Apply calibration and replacement adjustment in the configured order."""
    lam = calib.effective_lam
    if calib.order == "calibrate-first":
        z = calibrate_logits(z, lam, calib.extended_lambda)
        return adjust_logits(z, layer_plan, calib.bottom_mode, calib.halve_top_logits)
    z = adjust_logits(z, layer_plan, calib.bottom_mode, calib.halve_top_logits)
    return calibrate_logits(z, lam, calib.extended_lambda)


def romer_layer_forward(
    layer: MoELayer,
    layer_plan: LayerPlan,
    cfg: NoiseConfig,
    calib: CalibrationConfig,
    x: np.ndarray,
    rng: RandomStream,
    trace: Optional[RoutingTrace] = None,
    *,
    token: int = 0,
    residual: bool = True,
    renormalize: bool = False,
    frozen: Optional[FrozenNoiseCache] = None,
) -> np.ndarray:
    """One MoE block of a patched model under the ROMER pipeline.

    Raw (noisy) logits are calibrated and adjusted, the gate comes from the
    softmax of the resulting vector, selected top-set experts run on both of
    their slots and every other selected expert runs once.
    """
    z = router_logits(layer, x, cfg, rng, frozen=frozen)
    z_routed = routed_logits(z, layer_plan, calib)
    selected, gates = select_and_gate(z_routed, layer.k, renormalize)
    pairs = layer_plan.pairs
    out = np.zeros(layer.hidden_dim)
    locations: List[int] = []
    location_gates: List[float] = []
    for i, g in zip(selected, gates):
        if i in pairs:
            b = pairs[i]
            out += duplicated_expert_forward(
                layer.experts[i],
                layer.experts[b],
                x,
                g,
                cfg,
                rng,
                locations=(
                    expert_location(layer.layer_index, i),
                    expert_location(layer.layer_index, b),
                ),
                frozen=frozen,
            )
            locations.extend((i, b))
            location_gates.extend((g / 2.0, g / 2.0))
        else:
            f = expert_forward(
                layer.experts[i],
                x,
                cfg,
                rng,
                location=expert_location(layer.layer_index, i),
                frozen=frozen,
            )
            out += g * f
            locations.append(i)
            location_gates.append(g)
    if trace is not None:
        trace.append(
            RoutingEvent(
                token=token,
                layer=layer.layer_index,
                selected=tuple(selected),
                gates=tuple(gates),
                logits=z,
                locations=tuple(locations),
                location_gates=tuple(location_gates),
            )
        )
    return x + out if residual else out


def romer_model_forward(
    model: MoEModel,
    plan: ReplacementPlan,
    tokens: Sequence[np.ndarray],
    cfg: NoiseConfig,
    calib: CalibrationConfig,
    seed: int,
    *,
    frozen: Optional[FrozenNoiseCache] = None,
    workers: int = 1,
) -> Tuple[List[np.ndarray], RoutingTrace]:
    """Forward a patched model (see ``apply_replacement``) under ROMER routing.

    With an empty plan and zero calibration strength this performs exactly the
    same operations as ``model_forward``.
    """
    if not calib.replacement or plan.is_empty:
        plan = ReplacementPlan.empty(model.num_layers)
    elif len(plan.layers) != model.num_layers:
        raise ValueError(f"plan covers {len(plan.layers)} layers, model has {model.num_layers}")
    if calib.bottom_mode == "mask" and model.num_layers:
        live = model.num_experts - plan.n
        if live < model.k:
            raise ValueError(
                f"masking {plan.n} experts leaves {live} selectable, fewer than top-k = {model.k}"
            )
    if frozen is None:
        frozen = FrozenNoiseCache(seed)

    def layer_fn(layer, x, rng, trace, t):
        return romer_layer_forward(
            layer,
            plan.layer(layer.layer_index),
            cfg,
            calib,
            x,
            rng,
            trace,
            token=t,
            residual=model.residual,
            renormalize=model.renormalize,
            frozen=frozen,
        )

    return run_tokens(model, tokens, seed, layer_fn, workers=workers)
