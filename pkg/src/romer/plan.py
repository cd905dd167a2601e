"""Replacement plans: which experts get duplicated into which slots.

Per layer the ``n`` most activated experts form the top set T and the ``n``
least activated of the remaining experts form the bottom set B. The rank-r
top expert is paired with the rank-r bottom expert; during programming each
bottom slot is overwritten with its partner's weights.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np

from src.moe.expert import ExpertFFN
from src.moe.model import MoEModel
from src.profiler.activation import ActivationMap

logger = logging.getLogger(__name__)

PLAN_FORMAT = "romer-replacement-plan"


@dataclass(frozen=True)
class LayerPlan:
    """Top set, bottom set and the pairing ``top[r] -> bottom[r]``."""

    top: Tuple[int, ...] = ()
    bottom: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "top", tuple(int(i) for i in self.top))
        object.__setattr__(self, "bottom", tuple(int(i) for i in self.bottom))
        if len(self.top) != len(self.bottom):
            raise ValueError(
                f"top and bottom sets differ in size ({len(self.top)} vs {len(self.bottom)})"
            )
        if len(set(self.top)) != len(self.top) or len(set(self.bottom)) != len(self.bottom):
            raise ValueError("top and bottom sets must not repeat an expert")
        if set(self.top) & set(self.bottom):
            raise ValueError("top and bottom sets would overlap")

    @property
    def n(self) -> int:
        return len(self.top)

    @property
    def pairs(self) -> Dict[int, int]:
        return dict(zip(self.top, self.bottom))

    def partner(self, expert: int) -> int:
        """Bottom slot holding the copy of top expert ``expert``."""
        try:
            return self.pairs[expert]
        except KeyError:
            raise KeyError(f"expert {expert} is not in the top set {self.top}") from None

    def with_pairing(self, bottom_order: Sequence[int]) -> "LayerPlan":
        """Same sets, different bijection."""
        if sorted(bottom_order) != sorted(self.bottom):
            raise ValueError(f"{list(bottom_order)} is not a permutation of {list(self.bottom)}")
        return LayerPlan(self.top, tuple(bottom_order))

    def validate(self, num_experts: int) -> None:
        for i in self.top + self.bottom:
            if not 0 <= i < num_experts:
                raise IndexError(f"expert index {i} outside [0, {num_experts})")


@dataclass(frozen=True)
class ReplacementPlan:
    layers: Tuple[LayerPlan, ...]
    n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        for idx, layer in enumerate(self.layers):
            if layer.n != self.n:
                raise ValueError(f"layer {idx} plan has {layer.n} pairs, plan n is {self.n}")

    @classmethod
    def empty(cls, num_layers: int) -> "ReplacementPlan":
        return cls(tuple(LayerPlan() for _ in range(num_layers)), 0)

    @property
    def is_empty(self) -> bool:
        return self.n == 0

    def layer(self, index: int) -> LayerPlan:
        if not self.layers:
            return LayerPlan()
        return self.layers[index]

    def to_dict(self) -> dict:
        return {
            "format": PLAN_FORMAT,
            "n": self.n,
            "layers": [
                {
                    "layer": idx,
                    "top": list(lp.top),
                    "bottom": list(lp.bottom),
                    "pairs": [[t, b] for t, b in zip(lp.top, lp.bottom)],
                }
                for idx, lp in enumerate(self.layers)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReplacementPlan":
        if d.get("format") != PLAN_FORMAT:
            raise ValueError(f"not a replacement plan (format={d.get('format')!r})")
        layers = []
        for entry in d["layers"]:
            pairs = entry.get("pairs")
            if pairs is not None:
                layers.append(LayerPlan(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs)))
            else:
                layers.append(LayerPlan(tuple(entry["top"]), tuple(entry["bottom"])))
        return cls(tuple(layers), int(d["n"]))

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")
        logger.info(f"Replacement plan saved to {path}")

    @classmethod
    def load(cls, path) -> "ReplacementPlan":
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))


def plan_layer(values: np.ndarray, n: int) -> LayerPlan:
    """Rank-paired top/bottom sets for one layer of activation values."""
    idx = np.arange(values.size)
    descending = np.lexsort((idx, -values))
    top = [int(i) for i in descending[:n]]
    chosen = set(top)
    ascending = np.lexsort((idx, values))
    bottom = [int(i) for i in ascending if int(i) not in chosen][:n]
    return LayerPlan(tuple(top), tuple(bottom))


def build_replacement_plan(amap: ActivationMap, n: int) -> ReplacementPlan:
    """Plan from an activation map.

    Raises:
        ValueError: "top and bottom sets would overlap" when 2n > E.
    """
    n = int(n)
    if n < 0:
        raise ValueError(f"replacement count must be >= 0, got {n}")
    if 2 * n > amap.num_experts:
        raise ValueError(
            f"top and bottom sets would overlap: 2n = {2 * n} > E = {amap.num_experts}"
        )
    layers = tuple(plan_layer(row, n) for row in amap.values)
    logger.info(f"Built replacement plan with n={n} over {len(layers)} layers")
    return ReplacementPlan(layers, n)


def apply_replacement(model: MoEModel, plan: ReplacementPlan) -> MoEModel:
    """Programming phase: copy each top expert into its paired bottom slot.

    Returns a new model; the input model is left untouched.
    """
    if plan.is_empty:
        return model
    if len(plan.layers) != model.num_layers:
        raise ValueError(
            f"plan covers {len(plan.layers)} layers, model has {model.num_layers}"
        )
    new_layers = []
    for layer, layer_plan in zip(model.layers, plan.layers):
        layer_plan.validate(layer.num_experts)
        experts = list(layer.experts)
        for top, bottom in zip(layer_plan.top, layer_plan.bottom):
            src = layer.experts[top]
            experts[bottom] = ExpertFFN(src.w_in.copy(), src.w_out.copy(), src.activation)
        new_layers.append(layer.with_experts(experts))
    return model.with_layers(new_layers)
