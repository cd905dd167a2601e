"""Toy next-token language model for perplexity under analog noise.

Embedding -> one MoE block -> output head, trained with plain SGD on a
synthetic Markov-chain corpus. The top-k choice is treated as constant in the
backward pass (straight-through), so gradients flow only through the gates of
the selected experts. After training, the MoE block is evaluated clean, under
vanilla noise and under ROMER; embedding and head stay digital.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.core.rng import DATA_STREAM, RandomStream
from src.core.stats import log_softmax, softmax, topk_indices
from src.moe.expert import ExpertFFN
from src.moe.layer import MoELayer, RouterSpec
from src.moe.model import MoEModel, model_forward
from src.noise.specs import NoiseConfig
from src.profiler.activation import accumulate_activation
from src.romer.calibration import CalibrationConfig
from src.romer.pipeline import romer_model_forward
from src.romer.plan import apply_replacement, build_replacement_plan

logger = logging.getLogger(__name__)


@dataclass
class ToyLMSpec:
    vocab: int = 32
    hidden_dim: int = 16
    inner_dim: int = 16
    num_experts: int = 8
    k: int = 2
    successors: int = 3
    train_tokens: int = 2000
    eval_tokens: int = 400
    epochs: int = 8
    lr: float = 0.1
    sigma: float = 0.1
    n: int = 1
    lam: float = 0.4
    seeds: int = 5

    def __post_init__(self) -> None:
        if not 2 <= self.vocab <= 64:
            raise ValueError(f"vocab must be in [2, 64], got {self.vocab}")
        if not 1 <= self.k <= self.num_experts:
            raise ValueError(f"k must be in [1, {self.num_experts}], got {self.k}")
        if 2 * self.n > self.num_experts or self.num_experts - self.n < self.k:
            raise ValueError(f"n = {self.n} is too large for {self.num_experts} experts")

    def to_dict(self) -> dict:
        return asdict(self)


def transition_table(spec: ToyLMSpec, rs: RandomStream) -> np.ndarray:
    """Sparse random row-stochastic table with ``successors`` entries per row."""
    table = np.zeros((spec.vocab, spec.vocab))
    for a in range(spec.vocab):
        nxt = rs.choice(spec.vocab, size=spec.successors, replace=False)
        table[a, nxt] = rs.uniform(0.5, 1.5, size=spec.successors)
    return table / table.sum(axis=1, keepdims=True)


def markov_corpus(table: np.ndarray, count: int, rs: RandomStream) -> np.ndarray:
    """Token ids sampled from ``table``; ``count`` transitions."""
    vocab = table.shape[0]
    seq = np.empty(count + 1, dtype=np.int64)
    seq[0] = rs.integers(0, vocab)
    draws = rs.uniform(size=count)
    cumulative = np.cumsum(table, axis=1)
    for t in range(count):
        seq[t + 1] = min(int(np.searchsorted(cumulative[seq[t]], draws[t])), vocab - 1)
    return seq


def _sigmoid(u: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-u))


class ToyLM:
    """Parameters and the manual forward/backward of the toy model (silu experts)."""

    def __init__(self, spec: ToyLMSpec, rs: RandomStream):
        d, m, e, v = spec.hidden_dim, spec.inner_dim, spec.num_experts, spec.vocab
        self.spec = spec
        self.emb = rs.standard_normal((v, d)) / np.sqrt(d)
        self.router = rs.standard_normal((e, d)) / np.sqrt(d)
        self.w_in = rs.standard_normal((e, m, d)) / np.sqrt(d)
        self.w_out = rs.standard_normal((e, d, m)) / np.sqrt(m)
        self.head = rs.standard_normal((v, d)) / np.sqrt(d)

    def step(self, a: int, b: int, lr: float) -> float:
        """One SGD step on the pair (a -> b); returns the loss."""
        x = self.emb[a]
        z = self.router @ x
        p = softmax(z)
        selected = topk_indices(z, self.spec.k)
        y = x.copy()
        cache = []
        for i in selected:
            u = self.w_in[i] @ x
            s = _sigmoid(u)
            h = u * s
            f = self.w_out[i] @ h
            y += p[i] * f
            cache.append((i, u, s, h, f))
        logp = log_softmax(self.head @ y)
        loss = -float(logp[b])

        do = np.exp(logp)
        do[b] -= 1.0
        d_head = np.outer(do, y)
        dy = self.head.T @ do
        dx = dy.copy()
        g = np.zeros_like(z)
        for i, u, s, h, f in cache:
            g[i] = float(dy @ f)
            df = p[i] * dy
            dh = self.w_out[i].T @ df
            du = dh * s * (1.0 + u * (1.0 - s))
            self.w_out[i] -= lr * np.outer(df, h)
            dx += self.w_in[i].T @ du
            self.w_in[i] -= lr * np.outer(du, x)
        dz = p * (g - float(p @ g))
        dx += self.router.T @ dz
        self.router -= lr * np.outer(dz, x)
        self.head -= lr * d_head
        self.emb[a] -= lr * dx
        return loss

    def as_moe(self) -> MoEModel:
        experts = tuple(
            ExpertFFN(self.w_in[i], self.w_out[i], "silu") for i in range(self.spec.num_experts)
        )
        layer = MoELayer(RouterSpec(self.router, self.spec.k), experts, 0)
        return MoEModel((layer,), self.spec.hidden_dim, residual=True)

    def perplexity(self, hidden: Sequence[np.ndarray], targets: Sequence[int]) -> float:
        nll = [-float(log_softmax(self.head @ y)[b]) for y, b in zip(hidden, targets)]
        return float(np.exp(np.mean(nll)))


def train_toy(spec: ToyLMSpec, seed: int = 0) -> Tuple[ToyLM, List[float]]:
    rs = RandomStream(seed, (DATA_STREAM, 10))
    table = transition_table(spec, rs.child(0))
    corpus = markov_corpus(table, spec.train_tokens, rs.child(3))
    lm = ToyLM(spec, rs.child(1))
    losses = []
    for epoch in range(spec.epochs):
        total = 0.0
        for a, b in zip(corpus[:-1], corpus[1:]):
            total += lm.step(int(a), int(b), spec.lr)
        losses.append(total / spec.train_tokens)
        logger.debug(f"toy LM epoch {epoch}: loss {losses[-1]:.4f}")
    return lm, losses


def evaluate_toy(spec: ToyLMSpec, lm: ToyLM, seed: int = 0) -> Dict[str, float]:
    """Mean perplexity of clean, vanilla-noisy and ROMER-noisy inference."""
    rs = RandomStream(seed, (DATA_STREAM, 10))
    table = transition_table(spec, rs.child(0))
    train = markov_corpus(table, spec.train_tokens, rs.child(3))
    held_out = markov_corpus(table, spec.eval_tokens, rs.child(2))
    model = lm.as_moe()
    inputs = [lm.emb[a] for a in held_out[:-1]]
    targets = [int(b) for b in held_out[1:]]

    clean_hidden, _ = model_forward(model, inputs, NoiseConfig.disabled(), seed)
    _, profile_trace = model_forward(model, [lm.emb[a] for a in train[:-1]], NoiseConfig.disabled(), seed)
    amap = accumulate_activation(profile_trace, 1, spec.num_experts)
    plan = build_replacement_plan(amap, spec.n)
    patched = apply_replacement(model, plan)
    calib = CalibrationConfig(lam=spec.lam, n=spec.n)
    cfg = NoiseConfig().with_sigma(spec.sigma)

    vanilla, romer = [], []
    for j in range(spec.seeds):
        v_hidden, _ = model_forward(model, inputs, cfg, seed + j)
        r_hidden, _ = romer_model_forward(patched, plan, inputs, cfg, calib, seed + j)
        vanilla.append(lm.perplexity(v_hidden, targets))
        romer.append(lm.perplexity(r_hidden, targets))
    return {
        "sigma": spec.sigma,
        "clean": lm.perplexity(clean_hidden, targets),
        "vanilla": float(np.mean(vanilla)),
        "romer": float(np.mean(romer)),
    }
