"""Tests for synthetic models and corpora."""

import numpy as np
import pytest

from src.harness.experiment_config import ConfigError, CorpusSpec, ModelSpec
from src.harness.generators import Corpus, cluster_geometry, generate_corpus, generate_model
from src.moe.model import MoEModel, model_forward
from src.noise.specs import NoiseConfig
from src.profiler.activation import accumulate_activation
from src.profiler.balance import balance_report


class TestClusterGeometry:
    """Tests for the shared cluster layout."""

    def test_orthonormal_split(self):
        geo = cluster_geometry(12, 4, cluster_seed=5)
        basis = np.vstack([geo.directions, geo.offset[None, :], geo.free.T])

        assert basis.shape == (12, 12)
        assert np.allclose(basis @ basis.T, np.eye(12), atol=1e-12)

    def test_unit_centroids(self):
        geo = cluster_geometry(12, 4, cluster_seed=5)

        assert np.allclose(np.linalg.norm(geo.centroids, axis=1), 1.0)

    def test_deterministic(self):
        a = cluster_geometry(8, 3, cluster_seed=1)
        b = cluster_geometry(8, 3, cluster_seed=1)

        assert np.array_equal(a.centroids, b.centroids)

    def test_too_many_clusters(self):
        with pytest.raises(ValueError):
            cluster_geometry(6, 5, cluster_seed=1)


class TestGenerateModel:
    """Tests for generate_model."""

    def test_same_spec_twice_identical(self, small_spec):
        a = generate_model(small_spec)
        b = generate_model(small_spec)

        assert a.to_dict() == b.to_dict()

    def test_shape(self, small_spec):
        model = generate_model(small_spec)

        assert model.num_layers == 2
        assert model.num_experts == 8
        assert model.k == 2
        assert model.layers[1].experts[0].inner_dim == 8

    def test_k_above_experts(self):
        with pytest.raises(ConfigError):
            generate_model(ModelSpec(num_experts=4, k=5, clusters=2))

    def test_random_mode(self):
        model = generate_model(ModelSpec(mode="random", num_layers=3, num_experts=6, hidden_dim=5))

        assert model.num_layers == 3
        assert model.hidden_dim == 5

    def test_pairs_share_router_rows(self, small_spec):
        """Test every active router row appears exactly twice."""
        router = generate_model(small_spec).layers[0].router.w_router
        rows = [tuple(np.round(r, 12)) for r in router]

        counts = sorted(rows.count(r) for r in set(rows))

        assert counts.count(2) == small_spec.clusters

    def test_clean_entropy_is_high(self):
        """Test the default model spreads clean load over its experts."""
        spec = ModelSpec()
        model = generate_model(spec)
        corpus = generate_corpus(CorpusSpec(tokens=256).resolved(spec))

        _, trace = model_forward(model, list(corpus.tokens), NoiseConfig.disabled(), 0)
        report = balance_report(accumulate_activation(trace, spec.num_layers, spec.num_experts))

        assert min(report.entropy) >= 0.9

    def test_save_load(self, small_spec, tmp_path):
        model = generate_model(small_spec)
        model.save(tmp_path / "m.json")

        assert MoEModel.load(tmp_path / "m.json").to_dict() == model.to_dict()


class TestGenerateCorpus:
    """Tests for generate_corpus."""

    def test_empty(self, small_spec):
        corpus = generate_corpus(CorpusSpec(tokens=0).resolved(small_spec))

        assert len(corpus) == 0

    def test_zero_spread_gives_centroids(self, small_spec):
        spec = CorpusSpec(tokens=20, spread=0.0).resolved(small_spec)
        geo = cluster_geometry(spec.hidden_dim, spec.clusters, spec.cluster_seed)

        corpus = generate_corpus(spec)

        for token, label in zip(corpus.tokens, corpus.clusters):
            assert np.array_equal(token, geo.centroids[label])

    def test_unit_norm_tokens(self, small_spec):
        corpus = generate_corpus(CorpusSpec(tokens=50, spread=0.3).resolved(small_spec))

        assert np.allclose([np.linalg.norm(t) for t in corpus.tokens], 1.0)

    def test_cluster_populations(self):
        """Test 1000 tokens over 8 clusters follow the multinomial expectation."""
        spec = CorpusSpec(tokens=1000).resolved(ModelSpec(hidden_dim=16, num_experts=16, clusters=8))
        expected = 1000 / 8
        sd = np.sqrt(1000 * (1 / 8) * (7 / 8))

        counts = np.bincount(generate_corpus(spec).clusters, minlength=8)
        deviations = np.abs(counts - expected) / sd

        assert counts.sum() == 1000
        assert np.count_nonzero(deviations <= 3.0) >= 7
        assert np.all(deviations <= 4.0)

    def test_unresolved_spec(self):
        with pytest.raises(ValueError):
            generate_corpus(CorpusSpec(tokens=5))

    def test_save_load(self, small_spec, tmp_path):
        corpus = generate_corpus(CorpusSpec(tokens=7).resolved(small_spec))
        corpus.save(tmp_path / "c.json")

        loaded = Corpus.load(tmp_path / "c.json")

        assert loaded.clusters == corpus.clusters
        assert all(np.array_equal(a, b) for a, b in zip(loaded.tokens, corpus.tokens))
