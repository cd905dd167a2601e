"""Multi-layer MoE model, file format and the full forward pass."""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.core.linalg import as_vector
from src.core.rng import TOKEN_STREAM, RandomStream
from src.noise.model import FrozenNoiseCache
from src.noise.specs import NoiseConfig
from .layer import MoELayer, moe_layer_forward
from .trace import RoutingTrace

logger = logging.getLogger(__name__)

MODEL_FORMAT = "romer-moe-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class MoEModel:
    layers: Tuple[MoELayer, ...]
    hidden_dim: int
    residual: bool = True
    renormalize: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        for layer in self.layers:
            if layer.hidden_dim != self.hidden_dim:
                raise ValueError(
                    f"layer {layer.layer_index} has hidden dim {layer.hidden_dim}, "
                    f"model has {self.hidden_dim}"
                )
        for pos, layer in enumerate(self.layers):
            if layer.layer_index != pos:
                raise ValueError(f"layer at position {pos} carries index {layer.layer_index}")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def num_experts(self) -> int:
        """Experts per layer (0 for an empty model)."""
        return self.layers[0].num_experts if self.layers else 0

    @property
    def k(self) -> int:
        return self.layers[0].k if self.layers else 0

    @property
    def parameter_count(self) -> int:
        return sum(
            layer.router.w_router.size + sum(e.parameter_count for e in layer.experts)
            for layer in self.layers
        )

    def with_layers(self, layers: Sequence[MoELayer]) -> "MoEModel":
        return MoEModel(
            layers=tuple(layers),
            hidden_dim=self.hidden_dim,
            residual=self.residual,
            renormalize=self.renormalize,
        )

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "hidden_dim": self.hidden_dim,
            "residual": self.residual,
            "renormalize": self.renormalize,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MoEModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a model file (format={d.get('format')!r})")
        return cls(
            layers=tuple(MoELayer.from_dict(layer) for layer in d["layers"]),
            hidden_dim=int(d["hidden_dim"]),
            residual=bool(d.get("residual", True)),
            renormalize=bool(d.get("renormalize", False)),
        )

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)
        logger.info(f"Model saved to {path}")

    @classmethod
    def load(cls, path) -> "MoEModel":
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))


LayerFn = Callable[..., np.ndarray]


def run_tokens(
    model: MoEModel,
    tokens: Sequence[np.ndarray],
    seed: int,
    layer_fn: LayerFn,
    *,
    workers: int = 1,
) -> Tuple[List[np.ndarray], RoutingTrace]:
    """Push every token through every layer with ``layer_fn``.

    Token ``t`` owns the stream ``(seed, TOKEN_STREAM, t)``, so the result does
    not depend on how tokens are split between workers.
    """
    tokens = [as_vector(t, model.hidden_dim) for t in tokens]

    def run_chunk(indices: Sequence[int]) -> Tuple[List[Tuple[int, np.ndarray]], RoutingTrace]:
        trace = RoutingTrace()
        results = []
        for t in indices:
            rng = RandomStream(seed, (TOKEN_STREAM, t))
            x = np.array(tokens[t])
            for layer in model.layers:
                x = layer_fn(layer, x, rng, trace, t)
            results.append((t, x))
        return results, trace

    indices = list(range(len(tokens)))
    if workers <= 1 or len(indices) < 2:
        chunks = [indices]
    else:
        chunks = [indices[w::workers] for w in range(workers)]
        chunks = [c for c in chunks if c]

    if len(chunks) == 1:
        parts = [run_chunk(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(run_chunk, chunks))

    outputs: List[Optional[np.ndarray]] = [None] * len(tokens)
    for results, _ in parts:
        for t, x in results:
            outputs[t] = x
    trace = RoutingTrace.merge(trace for _, trace in parts)
    return outputs, trace


def model_forward(
    model: MoEModel,
    tokens: Sequence[np.ndarray],
    cfg: NoiseConfig,
    seed: int,
    *,
    frozen: Optional[FrozenNoiseCache] = None,
    workers: int = 1,
) -> Tuple[List[np.ndarray], RoutingTrace]:
    """Deterministic forward of every token; returns outputs and the trace.

    ``seed`` is also the deployment seed of the frozen noise when no cache is
    passed in.
    """
    if frozen is None:
        frozen = FrozenNoiseCache(seed)

    def layer_fn(layer, x, rng, trace, t):
        return moe_layer_forward(
            layer,
            x,
            cfg,
            rng,
            trace,
            token=t,
            residual=model.residual,
            renormalize=model.renormalize,
            frozen=frozen,
        )

    return run_tokens(model, tokens, seed, layer_fn, workers=workers)
