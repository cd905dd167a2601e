"""Expert feed-forward blocks and their activations."""

from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from src.core.linalg import as_matrix, matvec
from src.core.rng import RandomStream
from src.core.serialization import decode_array, encode_array
from src.noise.model import FrozenNoiseCache, noisy_matvec
from src.noise.specs import NoiseConfig

_GELU_C = np.sqrt(2.0 / np.pi)


def relu(u: np.ndarray) -> np.ndarray:
    """Elementwise max(u, 0)."""
    return np.maximum(u, 0.0)


def gelu(u: np.ndarray) -> np.ndarray:
    """GELU, tanh approximation."""
    return 0.5 * u * (1.0 + np.tanh(_GELU_C * (u + 0.044715 * u**3)))


def silu(u: np.ndarray) -> np.ndarray:
    """Elementwise u * sigmoid(u)."""
    return u / (1.0 + np.exp(-u))


def identity(u: np.ndarray) -> np.ndarray:
    return u


ACTIVATIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "relu": relu,
    "gelu": gelu,
    "silu": silu,
    "identity": identity,
}


def expert_location(layer_index: int, expert_index: int) -> str:
    """Physical location prefix of an expert slot."""
    return f"L{layer_index}/E{expert_index}"


@dataclass(frozen=True)
class ExpertFFN:
    """Two-matrix expert ``w_out @ act(w_in @ x)``.

    ``w_in`` is inner x hidden, ``w_out`` is hidden x inner.
    """

    w_in: np.ndarray
    w_out: np.ndarray
    activation: str = "silu"

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_in", as_matrix(self.w_in))
        object.__setattr__(self, "w_out", as_matrix(self.w_out))
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}; expected one of {sorted(ACTIVATIONS)}"
            )
        if self.w_in.shape[0] != self.w_out.shape[1]:
            raise ValueError(
                f"inner dim mismatch: w_in has {self.w_in.shape[0]} rows, "
                f"w_out has {self.w_out.shape[1]} cols"
            )
        if self.w_in.shape[1] != self.w_out.shape[0]:
            raise ValueError(
                f"hidden dim mismatch: w_in has {self.w_in.shape[1]} cols, "
                f"w_out has {self.w_out.shape[0]} rows"
            )

    @property
    def hidden_dim(self) -> int:
        return self.w_in.shape[1]

    @property
    def inner_dim(self) -> int:
        return self.w_in.shape[0]

    @property
    def parameter_count(self) -> int:
        return self.w_in.size + self.w_out.size

    def same_weights(self, other: "ExpertFFN") -> bool:
        return (
            self.activation == other.activation
            and np.array_equal(self.w_in, other.w_in)
            and np.array_equal(self.w_out, other.w_out)
        )

    def to_dict(self) -> dict:
        return {
            "activation": self.activation,
            "w_in": encode_array(self.w_in),
            "w_out": encode_array(self.w_out),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExpertFFN":
        return cls(
            w_in=decode_array(d["w_in"]),
            w_out=decode_array(d["w_out"]),
            activation=d.get("activation", "silu"),
        )


def expert_forward(
    expert: ExpertFFN,
    x: np.ndarray,
    cfg: NoiseConfig,
    rng: RandomStream,
    *,
    location: str,
    frozen: Optional[FrozenNoiseCache] = None,
) -> np.ndarray:
    """Run one expert stored at ``location``, noisy when experts are perturbed."""
    act = ACTIVATIONS[expert.activation]
    if not cfg.perturb_experts:
        return matvec(expert.w_out, act(matvec(expert.w_in, x)))
    h = noisy_matvec(expert.w_in, x, cfg, rng, location=f"{location}/w_in", frozen=frozen)
    return noisy_matvec(
        expert.w_out, act(h), cfg, rng, location=f"{location}/w_out", frozen=frozen
    )
