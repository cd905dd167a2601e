"""Synthetic models and corpora.

Specialized models route by construction. The hidden space is split by a
random orthonormal basis into ``c`` cluster directions, one shared offset
direction ``u`` and a free subspace. Cluster centroids are
``(d_k + u) / sqrt(2)``. Each cluster owns a pair of experts per layer whose
router rows are both ``gain * (d_k - u)``: a token from cluster k scores about
0 on its pair and about ``-gain / sqrt(2)`` everywhere else, and the two
members of a pair tie exactly in clean inference. Experts write only into the
free subspace, so residual updates never move a token between clusters.
Experts beyond ``2c`` are dormant and never win a clean routing decision.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np

from src.core.linalg import as_vector
from src.core.rng import DATA_STREAM, RandomStream
from src.core.serialization import decode_array, encode_array
from src.moe.expert import ExpertFFN
from src.moe.layer import MoELayer, RouterSpec
from src.moe.model import MoEModel
from .experiment_config import CorpusSpec, ModelSpec

logger = logging.getLogger(__name__)

CORPUS_FORMAT = "romer-corpus"

# Sub-stream ids under DATA_STREAM.
_BASIS_STREAM = 0
_CENTROID_STREAM = 1
_MODEL_STREAM = 2
_CORPUS_STREAM = 3


@dataclass(frozen=True)
class ClusterGeometry:
    directions: np.ndarray  # c x d
    offset: np.ndarray  # d
    free: np.ndarray  # d x f, orthonormal columns
    centroids: np.ndarray  # c x d, unit rows


def cluster_geometry(hidden_dim: int, clusters: int, cluster_seed: int, mode: str = "specialized") -> ClusterGeometry:
    """Deterministic cluster layout shared by model and corpus generation."""
    if mode == "specialized":
        if clusters + 2 > hidden_dim:
            raise ValueError(f"need clusters + 2 <= hidden_dim, got {clusters} and {hidden_dim}")
        rs = RandomStream(cluster_seed, (DATA_STREAM, _BASIS_STREAM))
        q, r = np.linalg.qr(rs.standard_normal((hidden_dim, hidden_dim)))
        q = q * np.sign(np.diag(r))
        directions = q[:, :clusters].T.copy()
        offset = q[:, clusters].copy()
        free = q[:, clusters + 1 :].copy()
        centroids = (directions + offset) / np.sqrt(2.0)
        return ClusterGeometry(directions, offset, free, centroids)
    rs = RandomStream(cluster_seed, (DATA_STREAM, _CENTROID_STREAM))
    g = rs.standard_normal((clusters, hidden_dim))
    centroids = g / np.linalg.norm(g, axis=1, keepdims=True)
    return ClusterGeometry(centroids.copy(), np.zeros(hidden_dim), np.eye(hidden_dim), centroids)


def _expert_weights(
    rs: RandomStream, hidden: int, inner: int, free: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    w_in = rs.standard_normal((inner, hidden)) * (2.0 / np.sqrt(hidden))
    w_out = free @ rs.standard_normal((free.shape[1], inner)) * (0.5 / np.sqrt(inner))
    return w_in, w_out


def _specialized_layer(spec: ModelSpec, geo: ClusterGeometry, rs: RandomStream, index: int) -> MoELayer:
    d, e, c = spec.hidden_dim, spec.num_experts, spec.clusters
    perm = rs.permutation(e)
    router = np.zeros((e, d))
    experts: List[ExpertFFN] = [None] * e
    for k in range(c):
        base_in, base_out = _expert_weights(rs, d, spec.inner_dim, geo.free)
        for member in (perm[2 * k], perm[2 * k + 1]):
            router[member] = spec.router_gain * (geo.directions[k] - geo.offset)
            jit_in, jit_out = _expert_weights(rs, d, spec.inner_dim, geo.free)
            experts[member] = ExpertFFN(
                base_in + spec.jitter * jit_in,
                base_out + spec.jitter * jit_out,
                spec.activation,
            )
    for member in perm[2 * c :]:
        router[member] = -spec.router_gain * geo.offset + 0.05 * spec.router_gain * (
            geo.free @ rs.standard_normal(geo.free.shape[1])
        ) / np.sqrt(d)
        w_in, w_out = _expert_weights(rs, d, spec.inner_dim, geo.free)
        experts[member] = ExpertFFN(w_in, w_out, spec.activation)
    return MoELayer(RouterSpec(router, spec.k), tuple(experts), index)


def _random_layer(spec: ModelSpec, rs: RandomStream, index: int) -> MoELayer:
    d, e = spec.hidden_dim, spec.num_experts
    router = rs.standard_normal((e, d)) * (spec.router_gain / np.sqrt(d))
    eye = np.eye(d)
    experts = tuple(
        ExpertFFN(*_expert_weights(rs, d, spec.inner_dim, eye), spec.activation)
        for _ in range(e)
    )
    return MoELayer(RouterSpec(router, spec.k), experts, index)


def generate_model(spec: ModelSpec) -> MoEModel:
    """Build a model deterministically from ``spec.seed`` and ``spec.cluster_seed``.

    Raises:
        ValueError: for inconsistent dimensions (e.g. k > E).
    """
    if spec.k > spec.num_experts:
        raise ValueError(f"top-k {spec.k} exceeds expert count {spec.num_experts}")
    rs = RandomStream(spec.seed, (DATA_STREAM, _MODEL_STREAM))
    if spec.mode == "specialized":
        geo = cluster_geometry(spec.hidden_dim, spec.clusters, spec.cluster_seed, "specialized")
        layers = [
            _specialized_layer(spec, geo, rs.child(l), l) for l in range(spec.num_layers)
        ]
    else:
        layers = [_random_layer(spec, rs.child(l), l) for l in range(spec.num_layers)]
    model = MoEModel(
        layers=tuple(layers),
        hidden_dim=spec.hidden_dim,
        residual=spec.residual,
        renormalize=spec.renormalize,
    )
    logger.info(
        f"Generated {spec.mode} model: L={spec.num_layers} E={spec.num_experts} "
        f"k={spec.k} d={spec.hidden_dim}"
    )
    return model


@dataclass(frozen=True)
class Corpus:
    tokens: Tuple[np.ndarray, ...]
    clusters: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def to_dict(self) -> dict:
        return {
            "format": CORPUS_FORMAT,
            "clusters": list(self.clusters),
            "tokens": [encode_array(t) for t in self.tokens],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Corpus":
        if d.get("format") != CORPUS_FORMAT:
            raise ValueError(f"not a corpus file (format={d.get('format')!r})")
        tokens = tuple(as_vector(decode_array(t)) for t in d["tokens"])
        return cls(tokens, tuple(int(c) for c in d["clusters"]))

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)
        logger.info(f"Corpus of {len(self)} tokens saved to {path}")

    @classmethod
    def load(cls, path) -> "Corpus":
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))


def generate_corpus(spec: CorpusSpec) -> Corpus:
    """Unit-norm tokens ``normalize(centroid + spread * g / sqrt(d))``.

    ``spec`` must be resolved against a model section (see
    ``CorpusSpec.resolved``); clusters are drawn uniformly.
    """
    if spec.hidden_dim is None or spec.clusters is None or spec.cluster_seed is None:
        raise ValueError("corpus spec is not resolved against a model spec")
    geo = cluster_geometry(spec.hidden_dim, spec.clusters, spec.cluster_seed, spec.mode or "specialized")
    if spec.tokens == 0:
        return Corpus((), ())
    rs = RandomStream(spec.seed, (DATA_STREAM, _CORPUS_STREAM))
    labels = rs.integers(0, spec.clusters, size=spec.tokens)
    noise = rs.standard_normal((spec.tokens, spec.hidden_dim))
    tokens = []
    for label, g in zip(labels, noise):
        centroid = geo.centroids[label]
        if spec.spread == 0.0:
            tokens.append(as_vector(centroid))
            continue
        x = centroid + spec.spread * g / np.sqrt(spec.hidden_dim)
        tokens.append(as_vector(x / np.linalg.norm(x)))
    return Corpus(tuple(tokens), tuple(int(c) for c in labels))
