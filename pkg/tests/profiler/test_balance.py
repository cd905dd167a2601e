"""Tests for load-balance metrics."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.profiler.activation import ActivationMap
from src.profiler.balance import balance_report, normalized_entropy


def _map(rows):
    values = np.array(rows, dtype=float)
    return ActivationMap(values, np.zeros(values.shape, dtype=np.int64), 1)


class TestBalanceReport:
    """Tests for balance_report."""

    def test_uniform_layer(self):
        report = balance_report(_map([[1.0, 1.0, 1.0, 1.0]]), tau=0.9)

        assert report.entropy[0] == pytest.approx(1.0)
        assert report.max_mean_ratio[0] == pytest.approx(1.0)
        assert report.underactivated_fraction[0] == 0.0

    def test_one_hot_layer(self):
        report = balance_report(_map([[0.0, 5.0, 0.0, 0.0]]))

        assert report.entropy[0] == 0.0
        assert report.max_mean_ratio[0] == pytest.approx(4.0)
        assert report.underactivated_fraction[0] == 0.75

    def test_hand_example(self):
        """Test A = [2, 1, 1, 0] with tau 0.5."""
        report = balance_report(_map([[2.0, 1.0, 1.0, 0.0]]), tau=0.5)

        assert report.entropy[0] == pytest.approx(0.75, abs=1e-12)
        assert report.underactivated_fraction[0] == 0.25

    def test_empty_layer_flagged(self):
        report = balance_report(_map([[1.0, 1.0], [0.0, 0.0]]))

        assert report.empty_layers == [1]
        assert report.entropy[1] == 0.0
        assert report.mean_entropy == pytest.approx(0.5)

    def test_single_expert_entropy(self):
        assert normalized_entropy(np.array([3.0])) == 1.0

    def test_negative_tau(self):
        with pytest.raises(ValueError):
            balance_report(_map([[1.0]]), tau=-0.1)

    def test_to_dict(self):
        data = balance_report(_map([[2.0, 1.0, 1.0, 0.0]]), tau=0.5).to_dict()

        assert data["tau"] == 0.5
        assert data["mean_entropy"] == pytest.approx(0.75)
        assert data["empty_layers"] == []

    def test_empty_layer_not_underactivated(self):
        """Test that a layer with no activation reports an underactivated fraction of 0."""
        report = balance_report(_map([[0.0, 0.0, 0.0, 0.0]]))

        assert report.underactivated_fraction == [0.0]
        assert report.empty_layers == [0]
        assert report.mean_underactivated_fraction == 0.0


class TestNormalizedEntropy:
    """Tests for normalized_entropy."""

    @given(
        st.lists(st.floats(min_value=0.0, max_value=100.0), min_size=2, max_size=16),
        st.randoms(use_true_random=False),
    )
    @settings(max_examples=200)
    def test_permutation_invariant(self, values, rnd):
        """Test that reordering the experts leaves the entropy unchanged."""
        shuffled = list(values)
        rnd.shuffle(shuffled)

        assert normalized_entropy(np.array(shuffled)) == pytest.approx(
            normalized_entropy(np.array(values)), abs=1e-12
        )
