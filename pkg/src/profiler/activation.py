"""Cumulative activation magnitude per (layer, expert)."""

from dataclasses import dataclass

import numpy as np

from src.moe.trace import RoutingTrace

ATTRIBUTIONS = ("physical", "logical")


@dataclass(frozen=True)
class ActivationMap:
    """L x E gate mass ``values`` plus selection ``counts`` over ``token_count`` tokens."""

    values: np.ndarray
    counts: np.ndarray
    token_count: int

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        counts = np.array(self.counts, dtype=np.int64)
        if values.ndim != 2 or values.shape != counts.shape:
            raise ValueError(
                f"values {values.shape} and counts {counts.shape} must be equal 2-D shapes"
            )
        if np.any(values < 0):
            raise ValueError("activation values must be >= 0")
        values.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "token_count", int(self.token_count))

    @classmethod
    def zeros(cls, num_layers: int, num_experts: int) -> "ActivationMap":
        return cls(
            np.zeros((num_layers, num_experts)),
            np.zeros((num_layers, num_experts), dtype=np.int64),
            0,
        )

    @property
    def num_layers(self) -> int:
        return self.values.shape[0]

    @property
    def num_experts(self) -> int:
        return self.values.shape[1]

    def layer_totals(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def __add__(self, other: "ActivationMap") -> "ActivationMap":
        if self.values.shape != other.values.shape:
            raise ValueError(
                f"cannot add activation maps of shapes {self.values.shape} and {other.values.shape}"
            )
        return ActivationMap(
            self.values + other.values,
            self.counts + other.counts,
            self.token_count + other.token_count,
        )


def accumulate_activation(
    trace: RoutingTrace,
    num_layers: int,
    num_experts: int,
    attribution: str = "physical",
) -> ActivationMap:
    """Sum gate probability into ``A[l, i]`` for every event selecting ``i``.

    Args:
        trace: Routing events to fold.
        num_layers: L.
        num_experts: E.
        attribution: ``physical`` credits the memory slots that computed
            (duplicated experts split their gate between two slots);
            ``logical`` credits the experts the router chose.

    Raises:
        IndexError: for a layer or expert index outside the map.
    """
    if attribution not in ATTRIBUTIONS:
        raise ValueError(f"attribution must be one of {ATTRIBUTIONS}, got {attribution!r}")
    values = np.zeros((num_layers, num_experts))
    counts = np.zeros((num_layers, num_experts), dtype=np.int64)
    tokens = set()
    for event in trace:
        if not 0 <= event.layer < num_layers:
            raise IndexError(f"layer {event.layer} outside [0, {num_layers})")
        if attribution == "physical":
            indices, gates = event.locations, event.location_gates
        else:
            indices, gates = event.selected, event.gates
        for i, g in zip(indices, gates):
            if not 0 <= i < num_experts:
                raise IndexError(f"expert {i} outside [0, {num_experts}) at layer {event.layer}")
            values[event.layer, i] += g
            counts[event.layer, i] += 1
        tokens.add(event.token)
    return ActivationMap(values, counts, len(tokens))
