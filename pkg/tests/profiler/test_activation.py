"""Tests for activation-map accumulation."""

import numpy as np
import pytest

from src.moe.model import model_forward
from src.moe.trace import RoutingEvent, RoutingTrace
from src.noise.specs import NoiseConfig
from src.profiler.activation import ActivationMap, accumulate_activation


def _event(token, layer, selected, gates, locations=(), location_gates=()):
    return RoutingEvent(
        token, layer, tuple(selected), tuple(gates), np.zeros(6), tuple(locations), tuple(location_gates)
    )


class TestAccumulateActivation:
    """Tests for accumulate_activation."""

    def test_empty_trace(self):
        amap = accumulate_activation(RoutingTrace(), 2, 4)

        assert np.array_equal(amap.values, np.zeros((2, 4)))
        assert amap.token_count == 0

    def test_single_token(self):
        trace = RoutingTrace([_event(0, 0, (2, 5), (0.7, 0.3))])

        amap = accumulate_activation(trace, 1, 6)

        assert amap.values[0, 2] == 0.7
        assert amap.values[0, 5] == 0.3
        assert amap.values.sum() == pytest.approx(1.0)

    def test_three_token_hand_trace(self):
        """Test a hand-listed trace against hand-summed values."""
        trace = RoutingTrace(
            [
                _event(0, 0, (2, 5), (0.7, 0.3)),
                _event(1, 0, (2, 1), (0.5, 0.25)),
                _event(2, 1, (0,), (0.9,)),
                _event(2, 0, (4, 5), (0.125, 0.0625)),
            ]
        )

        amap = accumulate_activation(trace, 2, 6)

        expected = np.zeros((2, 6))
        expected[0] = [0.0, 0.25, 0.7 + 0.5, 0.0, 0.125, 0.3 + 0.0625]
        expected[1, 0] = 0.9
        assert np.array_equal(amap.values, expected)
        assert amap.counts[0, 2] == 2
        assert amap.counts[0, 5] == 2
        assert amap.token_count == 3

    def test_physical_and_logical_attribution(self):
        """Test a duplicated expert splits its gate over both slots."""
        trace = RoutingTrace([_event(0, 0, (1, 3), (0.4, 0.2), (1, 4, 3), (0.2, 0.2, 0.2))])

        physical = accumulate_activation(trace, 1, 6)
        logical = accumulate_activation(trace, 1, 6, attribution="logical")

        assert physical.values[0, 1] == 0.2
        assert physical.values[0, 4] == 0.2
        assert logical.values[0, 1] == 0.4
        assert logical.values[0, 4] == 0.0
        assert physical.values.sum() == pytest.approx(logical.values.sum())

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            accumulate_activation(RoutingTrace([_event(0, 0, (7,), (1.0,))]), 1, 6)
        with pytest.raises(IndexError):
            accumulate_activation(RoutingTrace([_event(0, 3, (0,), (1.0,))]), 2, 6)

    def test_unknown_attribution(self):
        with pytest.raises(ValueError):
            accumulate_activation(RoutingTrace(), 1, 1, attribution="both")

    def test_additive_over_random_splits(self, small_model, small_tokens):
        """Test map(A and B) == map(A) + map(B) for 100 random splits."""
        _, trace = model_forward(small_model, small_tokens, NoiseConfig.disabled(), 0)
        events = trace.events
        whole = accumulate_activation(trace, 2, 8)
        rng = np.random.default_rng(0)

        for _ in range(100):
            mask = rng.random(len(events)) < 0.5
            part_a = RoutingTrace([e for e, m in zip(events, mask) if m])
            part_b = RoutingTrace([e for e, m in zip(events, mask) if not m])
            combined = accumulate_activation(part_a, 2, 8) + accumulate_activation(part_b, 2, 8)

            assert np.allclose(combined.values, whole.values, rtol=1e-12, atol=1e-12)
            assert np.array_equal(combined.counts, whole.counts)


class TestActivationMap:
    """Tests for ActivationMap validation."""

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ActivationMap(np.array([[-1.0]]), np.zeros((1, 1)), 1)

    def test_shape_mismatch_on_add(self):
        with pytest.raises(ValueError):
            ActivationMap.zeros(1, 2) + ActivationMap.zeros(2, 2)

    def test_layer_totals(self):
        amap = ActivationMap(np.array([[1.0, 2.0], [0.5, 0.0]]), np.zeros((2, 2)), 3)

        assert np.array_equal(amap.layer_totals(), [3.0, 0.5])
