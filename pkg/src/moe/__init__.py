"""Toy Mixture-of-Experts network with clean or noisy analog MVMs."""

from .expert import ACTIVATIONS, ExpertFFN, expert_forward, expert_location
from .layer import MoELayer, RouterSpec, moe_layer_forward, router_logits, select_and_gate
from .model import MoEModel, model_forward, run_tokens
from .trace import RoutingEvent, RoutingTrace

__all__ = [
    "ACTIVATIONS",
    "ExpertFFN",
    "expert_forward",
    "expert_location",
    "MoELayer",
    "RouterSpec",
    "moe_layer_forward",
    "router_logits",
    "select_and_gate",
    "MoEModel",
    "model_forward",
    "run_tokens",
    "RoutingEvent",
    "RoutingTrace",
]
