"""Routing trace: what every token did at every layer."""

from dataclasses import dataclass
from typing import Iterable, Iterator, List, Tuple

import numpy as np


@dataclass(frozen=True)
class RoutingEvent:
    """Routing decision for one (token, layer).

    ``selected``/``gates`` are the logical view (experts chosen by the router
    and their gate values). ``locations``/``location_gates`` are the physical
    view: memory slots that actually computed and the gate mass credited to
    each. A duplicated expert credits half of its gate to each of its two
    slots; without duplication both views are equal.
    """

    token: int
    layer: int
    selected: Tuple[int, ...]
    gates: Tuple[float, ...]
    logits: np.ndarray
    locations: Tuple[int, ...] = ()
    location_gates: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.selected) != len(self.gates):
            raise ValueError("selected and gates must have equal length")
        if not self.locations:
            object.__setattr__(self, "locations", tuple(self.selected))
            object.__setattr__(self, "location_gates", tuple(self.gates))
        elif len(self.locations) != len(self.location_gates):
            raise ValueError("locations and location_gates must have equal length")


class RoutingTrace:
    """Append-only collection of routing events.

    Each worker fills its own trace; ``merge`` combines them and orders the
    result by (token, layer) so the outcome is independent of scheduling.
    """

    def __init__(self, events: Iterable[RoutingEvent] = ()):
        self._events: List[RoutingEvent] = list(events)

    def append(self, event: RoutingEvent) -> None:
        self._events.append(event)

    @property
    def events(self) -> List[RoutingEvent]:
        return list(self._events)

    def __iter__(self) -> Iterator[RoutingEvent]:
        return iter(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def sorted(self) -> "RoutingTrace":
        return RoutingTrace(sorted(self._events, key=lambda e: (e.token, e.layer)))

    @classmethod
    def merge(cls, traces: Iterable["RoutingTrace"]) -> "RoutingTrace":
        merged: List[RoutingEvent] = []
        for trace in traces:
            merged.extend(trace)
        return cls(merged).sorted()

    def tokens(self) -> List[int]:
        return sorted({e.token for e in self._events})

    def layer_events(self, layer: int) -> List[RoutingEvent]:
        return sorted(
            (e for e in self._events if e.layer == layer), key=lambda e: e.token
        )

    def logits_matrix(self, layer: int) -> np.ndarray:
        """Token x expert matrix of raw logits recorded at ``layer``."""
        events = self.layer_events(layer)
        if not events:
            return np.zeros((0, 0))
        return np.vstack([e.logits for e in events])

    def num_layers(self) -> int:
        return 1 + max((e.layer for e in self._events), default=-1)
