"""Router, MoE layer and single-layer sparse dispatch."""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.linalg import as_matrix, matvec
from src.core.rng import RandomStream
from src.core.serialization import decode_array, encode_array
from src.core.stats import softmax, topk_indices
from src.noise.model import FrozenNoiseCache, noisy_matvec
from src.noise.specs import NoiseConfig
from .expert import ExpertFFN, expert_forward, expert_location
from .trace import RoutingEvent, RoutingTrace


@dataclass(frozen=True)
class RouterSpec:
    """Linear router producing one logit per expert, top-k dispatch."""

    w_router: np.ndarray
    k: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_router", as_matrix(self.w_router))
        object.__setattr__(self, "k", int(self.k))
        if not 1 <= self.k <= self.num_experts:
            raise ValueError(f"top-k must be in [1, {self.num_experts}], got {self.k}")

    @property
    def num_experts(self) -> int:
        return self.w_router.shape[0]

    def to_dict(self) -> dict:
        return {"k": self.k, "w_router": encode_array(self.w_router)}

    @classmethod
    def from_dict(cls, d: dict) -> "RouterSpec":
        return cls(w_router=decode_array(d["w_router"]), k=d["k"])


@dataclass(frozen=True)
class MoELayer:
    router: RouterSpec
    experts: Tuple[ExpertFFN, ...]
    layer_index: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "experts", tuple(self.experts))
        if len(self.experts) != self.router.num_experts:
            raise ValueError(
                f"layer {self.layer_index}: router has {self.router.num_experts} rows "
                f"but {len(self.experts)} experts were given"
            )
        hidden = self.router.w_router.shape[1]
        for i, expert in enumerate(self.experts):
            if expert.hidden_dim != hidden:
                raise ValueError(
                    f"layer {self.layer_index}: expert {i} hidden dim {expert.hidden_dim} "
                    f"!= router hidden dim {hidden}"
                )

    @property
    def num_experts(self) -> int:
        return self.router.num_experts

    @property
    def hidden_dim(self) -> int:
        return self.router.w_router.shape[1]

    @property
    def k(self) -> int:
        return self.router.k

    @property
    def router_location(self) -> str:
        return f"L{self.layer_index}/router"

    def with_experts(self, experts: Sequence[ExpertFFN]) -> "MoELayer":
        return MoELayer(router=self.router, experts=tuple(experts), layer_index=self.layer_index)

    def to_dict(self) -> dict:
        return {
            "layer_index": self.layer_index,
            "router": self.router.to_dict(),
            "experts": [e.to_dict() for e in self.experts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MoELayer":
        return cls(
            router=RouterSpec.from_dict(d["router"]),
            experts=tuple(ExpertFFN.from_dict(e) for e in d["experts"]),
            layer_index=int(d.get("layer_index", 0)),
        )


def router_logits(
    layer: MoELayer,
    x: np.ndarray,
    cfg: NoiseConfig,
    rng: RandomStream,
    *,
    frozen: Optional[FrozenNoiseCache] = None,
) -> np.ndarray:
    if x.shape[0] != layer.hidden_dim:
        raise ValueError(
            f"dimension mismatch: token has length {x.shape[0]}, layer expects {layer.hidden_dim}"
        )
    if not cfg.perturb_router:
        return matvec(layer.router.w_router, x)
    return noisy_matvec(
        layer.router.w_router, x, cfg, rng, location=layer.router_location, frozen=frozen
    )


def select_and_gate(
    z: np.ndarray, k: int, renormalize: bool = False
) -> Tuple[List[int], List[float]]:
    """Top-k experts of ``z`` and their gate values.

    Gates are full-softmax probabilities at the selected indices, optionally
    renormalized to sum to one over the selection.
    """
    selected = topk_indices(z, k)
    p = softmax(z)
    gates = [float(p[i]) for i in selected]
    if renormalize:
        total = sum(gates)
        gates = [g / total for g in gates]
    return selected, gates


def moe_layer_forward(
    layer: MoELayer,
    x: np.ndarray,
    cfg: NoiseConfig,
    rng: RandomStream,
    trace: Optional[RoutingTrace] = None,
    *,
    token: int = 0,
    residual: bool = True,
    renormalize: bool = False,
    frozen: Optional[FrozenNoiseCache] = None,
) -> np.ndarray:
    """One MoE block: route, run the selected experts, gate-sum, residual."""
    z = router_logits(layer, x, cfg, rng, frozen=frozen)
    selected, gates = select_and_gate(z, layer.k, renormalize)
    out = np.zeros(layer.hidden_dim)
    for i, g in zip(selected, gates):
        f = expert_forward(
            layer.experts[i],
            x,
            cfg,
            rng,
            location=expert_location(layer.layer_index, i),
            frozen=frozen,
        )
        out += g * f
    if trace is not None:
        trace.append(
            RoutingEvent(
                token=token,
                layer=layer.layer_index,
                selected=tuple(selected),
                gates=tuple(gates),
                logits=z,
            )
        )
    return x + out if residual else out
