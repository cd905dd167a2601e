"""Tests for replacement plans and the programming phase."""

import numpy as np
import pytest

from src.noise.model import FrozenNoiseCache
from src.noise.specs import DeviceNoiseSpec
from src.profiler.activation import ActivationMap
from src.romer.plan import LayerPlan, ReplacementPlan, apply_replacement, build_replacement_plan


def _map(rows):
    values = np.array(rows, dtype=float)
    return ActivationMap(values, np.zeros(values.shape, dtype=np.int64), 1)


class TestBuildReplacementPlan:
    """Tests for build_replacement_plan."""

    def test_n_zero_is_empty(self):
        plan = build_replacement_plan(_map([[5.0, 1.0, 4.0, 2.0]]), 0)

        assert plan.is_empty
        assert plan.layers[0] == LayerPlan()

    def test_n_one(self):
        lp = build_replacement_plan(_map([[5.0, 1.0, 4.0, 2.0]]), 1).layers[0]

        assert lp.top == (0,)
        assert lp.bottom == (1,)
        assert lp.partner(0) == 1

    def test_rank_pairing(self):
        """Test rank-1 top pairs with rank-1 bottom, rank-2 with rank-2."""
        lp = build_replacement_plan(_map([[5.0, 1.0, 4.0, 2.0]]), 2).layers[0]

        assert lp.top == (0, 2)
        assert lp.bottom == (1, 3)
        assert lp.pairs == {0: 1, 2: 3}

    def test_ties_prefer_lower_index(self):
        lp = build_replacement_plan(_map([[1.0, 1.0, 1.0, 1.0]]), 2).layers[0]

        assert lp.top == (0, 1)
        assert lp.bottom == (2, 3)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            build_replacement_plan(_map([[1.0, 2.0, 3.0]]), 2)

    def test_every_layer_planned(self):
        plan = build_replacement_plan(_map([[5.0, 1.0, 4.0, 2.0], [0.0, 3.0, 1.0, 2.0]]), 1)

        assert plan.layers[1].top == (1,)
        assert plan.layers[1].bottom == (0,)


class TestLayerPlan:
    """Tests for LayerPlan validation."""

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            LayerPlan((0, 1), (2,))

    def test_overlap(self):
        with pytest.raises(ValueError, match="overlap"):
            LayerPlan((0, 1), (1, 2))

    def test_repeat(self):
        with pytest.raises(ValueError):
            LayerPlan((0, 0), (1, 2))

    def test_with_pairing(self):
        lp = LayerPlan((0, 2), (1, 3)).with_pairing([3, 1])

        assert lp.pairs == {0: 3, 2: 1}

    def test_with_pairing_wrong_set(self):
        with pytest.raises(ValueError):
            LayerPlan((0, 2), (1, 3)).with_pairing([1, 4])

    def test_validate_range(self):
        with pytest.raises(IndexError):
            LayerPlan((0,), (9,)).validate(4)

    def test_partner_of_non_top(self):
        with pytest.raises(KeyError):
            LayerPlan((0,), (1,)).partner(3)


class TestReplacementPlanFile:
    """Tests for plan files."""

    def test_save_load(self, tmp_path):
        plan = ReplacementPlan((LayerPlan((0, 2), (3, 1)), LayerPlan((1, 0), (2, 3))), 2)
        path = tmp_path / "plan.json"

        plan.save(path)

        assert ReplacementPlan.load(path) == plan

    def test_wrong_format(self):
        with pytest.raises(ValueError):
            ReplacementPlan.from_dict({"format": "other", "n": 0, "layers": []})

    def test_layer_n_mismatch(self):
        with pytest.raises(ValueError):
            ReplacementPlan((LayerPlan((0,), (1,)),), 2)


class TestApplyReplacement:
    """Tests for apply_replacement."""

    def test_empty_plan_returns_model(self, small_model):
        assert apply_replacement(small_model, ReplacementPlan.empty(2)) is small_model

    def test_bottom_slot_gets_top_weights(self, small_model):
        plan = ReplacementPlan((LayerPlan((0,), (1,)), LayerPlan((3,), (5,))), 1)

        patched = apply_replacement(small_model, plan)

        assert patched.layers[0].experts[1].same_weights(small_model.layers[0].experts[0])
        assert patched.layers[1].experts[5].same_weights(small_model.layers[1].experts[3])
        assert patched.layers[0].experts[2].same_weights(small_model.layers[0].experts[2])
        assert not small_model.layers[0].experts[1].same_weights(small_model.layers[0].experts[0])

    def test_router_untouched(self, small_model):
        plan = ReplacementPlan((LayerPlan((0,), (1,)), LayerPlan((0,), (1,))), 1)

        patched = apply_replacement(small_model, plan)

        assert np.array_equal(patched.layers[0].router.w_router, small_model.layers[0].router.w_router)

    def test_parameter_count_conserved(self, small_model):
        """Test overwriting bottom slots leaves the parameter count unchanged."""
        plan = ReplacementPlan((LayerPlan((0, 1), (6, 7)), LayerPlan((3, 4), (5, 6))), 2)

        patched = apply_replacement(small_model, plan)

        assert patched.parameter_count == small_model.parameter_count

    def test_layer_count_mismatch(self, small_model):
        with pytest.raises(ValueError):
            apply_replacement(small_model, ReplacementPlan((LayerPlan((0,), (1,)),), 1))

    def test_copies_see_independent_frozen_noise(self, small_model):
        """Test equal nominal weights at two slots get different realized weights."""
        plan = ReplacementPlan((LayerPlan((0,), (1,)), LayerPlan((0,), (1,))), 1)
        patched = apply_replacement(small_model, plan)
        cache = FrozenNoiseCache(11)
        spec = DeviceNoiseSpec(0.1)
        w = patched.layers[0].experts[0].w_in
        w_copy = patched.layers[0].experts[1].w_in

        real_a = cache.perturbed(w, spec, "L0/E0/w_in")
        real_b = cache.perturbed(w_copy, spec, "L0/E1/w_in")

        assert np.array_equal(w, w_copy)
        assert not np.array_equal(real_a, real_b)
