"""Pytest configuration and shared fixtures."""

import numpy as np
import pytest

from src.harness.experiment_config import CorpusSpec, ExperimentConfig, ModelSpec, apply_overrides
from src.harness.generators import generate_corpus, generate_model
from src.moe.expert import ExpertFFN
from src.moe.layer import MoELayer, RouterSpec
from src.moe.model import MoEModel
from src.noise.specs import AdcSpec, DeviceNoiseSpec, NoiseConfig


@pytest.fixture
def small_spec():
    """Fixture providing a small specialized model spec (2 layers, 8 experts)."""
    return ModelSpec(num_layers=2, num_experts=8, k=2, hidden_dim=8, inner_dim=8, clusters=3)


@pytest.fixture
def small_model(small_spec):
    return generate_model(small_spec)


@pytest.fixture
def small_tokens(small_spec):
    corpus = generate_corpus(CorpusSpec(tokens=24, spread=0.1, seed=3).resolved(small_spec))
    return list(corpus.tokens)


@pytest.fixture
def random_model():
    """Fixture providing a random-mode model, whose router logits spread out."""
    spec = ModelSpec(
        mode="random", num_layers=2, num_experts=8, k=2, hidden_dim=8, inner_dim=8, router_gain=2.0
    )
    return generate_model(spec)


@pytest.fixture
def noisy_cfg():
    """Fixture providing sigma=0.1 device noise with the default ADC."""
    return NoiseConfig(device=DeviceNoiseSpec(0.1), adc=AdcSpec())


@pytest.fixture
def hand_layer():
    """Fixture providing a 4-expert, 2-d layer with hand-set weights.

    Router rows are (1, 0), (0, 1), (-1, 0), (0, -1); every expert is a
    scaled identity so the output is easy to trace by hand.
    """
    router = RouterSpec(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]), k=2)
    experts = tuple(
        ExpertFFN(np.eye(2), np.eye(2) * (i + 1), "identity") for i in range(4)
    )
    return MoELayer(router, experts, 0)


@pytest.fixture
def hand_model(hand_layer):
    return MoEModel((hand_layer,), hidden_dim=2, residual=True)


SMALL_OVERRIDES = [
    "model.num_layers=2",
    "model.num_experts=8",
    "model.hidden_dim=8",
    "model.inner_dim=8",
    "model.clusters=3",
    "corpus.tokens=32",
    "trials=2",
    "sweep.temperatures=[]",
    "sweep.sigmas=[0.0, 0.1]",
    "ablation.n_values=[0, 1, 2]",
    "ablation.lambda_values=[0.0, 0.4]",
    "ablation.temperatures=[]",
    "ablation.sigmas=[0.1]",
    "oracle.n=2",
    "oracle.random_sets=2",
]


@pytest.fixture
def small_overrides():
    """Fixture providing CLI-style overrides for a fast 2-layer experiment."""
    return list(SMALL_OVERRIDES)


@pytest.fixture
def small_config(small_overrides):
    return ExperimentConfig.from_dict(apply_overrides({}, small_overrides))
