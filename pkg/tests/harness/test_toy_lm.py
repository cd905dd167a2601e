"""Tests for the toy language model."""

import numpy as np
import pytest

from src.core.rng import RandomStream
from src.harness.toy_lm import ToyLMSpec, evaluate_toy, markov_corpus, train_toy, transition_table


@pytest.fixture
def tiny_spec():
    return ToyLMSpec(vocab=12, hidden_dim=8, inner_dim=8, train_tokens=300, eval_tokens=60, epochs=3, seeds=2)


class TestToyLMSpec:
    def test_defaults_valid(self):
        assert ToyLMSpec().vocab == 32

    @pytest.mark.parametrize(
        "kwargs",
        [{"vocab": 1}, {"vocab": 65}, {"k": 0}, {"k": 9}, {"n": 5}, {"n": 4, "k": 5}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ToyLMSpec(**kwargs)


class TestMarkovCorpus:
    def test_table_is_row_stochastic(self, tiny_spec):
        table = transition_table(tiny_spec, RandomStream(0, 0))

        np.testing.assert_allclose(table.sum(axis=1), 1.0)
        assert np.all((table > 0).sum(axis=1) == tiny_spec.successors)

    def test_transitions_stay_in_table(self, tiny_spec):
        table = transition_table(tiny_spec, RandomStream(0, 0))
        seq = markov_corpus(table, 500, RandomStream(0, 1))

        assert len(seq) == 501
        assert seq.min() >= 0 and seq.max() < tiny_spec.vocab
        for a in range(tiny_spec.vocab):
            followers = set(seq[1:][seq[:-1] == a].tolist())
            assert len(followers) <= tiny_spec.successors


class TestTraining:
    def test_loss_decreases(self, tiny_spec):
        _, losses = train_toy(tiny_spec, seed=0)

        assert len(losses) == tiny_spec.epochs
        assert np.all(np.isfinite(losses))
        assert losses[-1] < losses[0]

    def test_deterministic(self, tiny_spec):
        _, a = train_toy(tiny_spec, seed=1)
        _, b = train_toy(tiny_spec, seed=1)

        assert a == b

    def test_moe_view(self, tiny_spec):
        lm, _ = train_toy(tiny_spec, seed=0)
        model = lm.as_moe()

        assert model.num_layers == 1
        assert model.num_experts == tiny_spec.num_experts


class TestEvaluation:
    def test_perplexities(self, tiny_spec):
        lm, _ = train_toy(tiny_spec, seed=0)

        result = evaluate_toy(tiny_spec, lm, seed=0)

        assert set(result) == {"sigma", "clean", "vanilla", "romer"}
        for key in ("clean", "vanilla", "romer"):
            assert result[key] >= 1.0
        assert result["clean"] < tiny_spec.vocab
