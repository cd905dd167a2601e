"""Tests for noisy matvec and the frozen noise cache."""

import numpy as np
import pytest

from src.core.linalg import matvec
from src.core.rng import RandomStream
from src.noise.model import (
    FrozenNoiseCache,
    apply_adc,
    noisy_matvec,
    perturb_weights,
    quantization_step,
)
from src.noise.specs import AdcSpec, DeviceNoiseSpec, NoiseConfig


class TestPerturbWeights:
    """Tests for multiplicative device noise."""

    def test_zero_sigma_is_exact_copy(self):
        w = np.array([[1.0, -2.0], [0.5, 3.0]])
        rng = RandomStream(0, 0)

        out = perturb_weights(w, DeviceNoiseSpec(0.0), rng)

        assert np.array_equal(out, w)
        assert out is not w

    def test_zero_weights_stay_zero(self):
        w = np.zeros((4, 4))

        out = perturb_weights(w, DeviceNoiseSpec(0.3), RandomStream(0, 0))

        assert np.array_equal(out, w)

    def test_relative_error_scale(self):
        w = np.full((200, 200), 2.0)

        out = perturb_weights(w, DeviceNoiseSpec(0.1), RandomStream(1, 0))
        rel = (out - w) / w

        assert abs(rel.std() - 0.1) < 0.003
        assert abs(rel.mean()) < 0.002

    def test_scales_linearly_with_weights(self):
        """Test perturbing c*W equals c times perturbing W under the same draws."""
        w = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, -0.25]])
        spec = DeviceNoiseSpec(0.2)

        for c in (-3.0, 0.5, 7.0):
            scaled = perturb_weights(c * w, spec, RandomStream(4, 1))
            base = perturb_weights(w, spec, RandomStream(4, 1))

            assert np.allclose(scaled, c * base, rtol=1e-12, atol=0.0)


class TestAdc:
    """Tests for ADC quantization noise."""

    def test_step_values(self):
        assert quantization_step(AdcSpec(v_ref=255.0, bits=8)) == 1.0
        assert quantization_step(AdcSpec(v_ref=1.0, bits=1)) == 1.0

    def test_error_bounded_by_half_step(self):
        adc = AdcSpec(v_ref=1.0, bits=4)
        y = np.zeros(10000)

        out = apply_adc(y, adc, RandomStream(0, 0))

        assert np.all(np.abs(out) <= adc.step / 2)

    def test_disabled_is_identity(self):
        y = np.array([0.1, 0.2])

        out = apply_adc(y, AdcSpec(enabled=False), RandomStream(0, 0))

        assert np.array_equal(out, y)


class TestFrozenNoiseCache:
    """Tests for per-location frozen noise."""

    def test_same_location_same_draws(self):
        cache = FrozenNoiseCache(5)

        a = cache.standard_normals("L0/E1/w_in", (3, 4))
        b = cache.standard_normals("L0/E1/w_in", (3, 4))

        assert a is b
        assert len(cache) == 1

    def test_draws_depend_on_seed_and_location_only(self):
        """Test two caches with one seed agree, regardless of request order."""
        first = FrozenNoiseCache(5)
        second = FrozenNoiseCache(5)
        first.standard_normals("L0/router", (2, 2))
        a = first.standard_normals("L1/E0/w_out", (3, 3))
        b = second.standard_normals("L1/E0/w_out", (3, 3))

        assert np.array_equal(a, b)

    def test_distinct_locations_differ(self):
        cache = FrozenNoiseCache(5)

        a = cache.standard_normals("L0/E0/w_in", (8,))
        b = cache.standard_normals("L0/E1/w_in", (8,))

        assert not np.array_equal(a, b)

    def test_distinct_deployments_differ(self):
        a = FrozenNoiseCache(1).standard_normals("L0/router", (8,))
        b = FrozenNoiseCache(2).standard_normals("L0/router", (8,))

        assert not np.array_equal(a, b)

    def test_perturbed_formula(self):
        cache = FrozenNoiseCache(3)
        w = np.array([[1.0, 2.0], [3.0, 4.0]])

        out = cache.perturbed(w, DeviceNoiseSpec(0.1), "loc")
        z = cache.standard_normals("loc", (2, 2))

        assert np.allclose(out, w * (1.0 + 0.1 * z))


class TestNoisyMatvec:
    """Tests for the composite noisy product."""

    def setup_method(self):
        rng = np.random.default_rng(0)
        self.w = rng.standard_normal((6, 4))
        self.x = rng.standard_normal(4)

    def test_disabled_matches_matvec_exactly(self):
        out = noisy_matvec(self.w, self.x, NoiseConfig.disabled(), RandomStream(0, 0))

        assert np.array_equal(out, matvec(self.w, self.x))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            noisy_matvec(self.w, np.ones(3), NoiseConfig.disabled(), RandomStream(0, 0))

    def test_frozen_needs_cache(self):
        cfg = NoiseConfig(device=DeviceNoiseSpec(0.1))

        with pytest.raises(ValueError):
            noisy_matvec(self.w, self.x, cfg, RandomStream(0, 0))

    def test_frozen_weights_fixed_across_calls(self):
        """Test frozen mode perturbs a location identically every call."""
        cfg = NoiseConfig(device=DeviceNoiseSpec(0.1), adc=AdcSpec(enabled=False))
        cache = FrozenNoiseCache(9)
        rng = RandomStream(0, 0)

        a = noisy_matvec(self.w, self.x, cfg, rng, location="L0/router", frozen=cache)
        b = noisy_matvec(self.w, self.x, cfg, rng, location="L0/router", frozen=cache)

        assert np.array_equal(a, b)
        assert not np.array_equal(a, matvec(self.w, self.x))

    def test_resample_draws_fresh_noise(self):
        cfg = NoiseConfig(device=DeviceNoiseSpec(0.1), adc=AdcSpec(enabled=False), noise_mode="resample")
        rng = RandomStream(0, 0)

        a = noisy_matvec(self.w, self.x, cfg, rng)
        b = noisy_matvec(self.w, self.x, cfg, rng)

        assert not np.array_equal(a, b)

    def test_adc_only_noise_is_bounded(self):
        cfg = NoiseConfig(adc=AdcSpec(v_ref=1.0, bits=4))
        clean = matvec(self.w, self.x)

        out = noisy_matvec(self.w, self.x, cfg, RandomStream(0, 0))

        assert np.all(np.abs(out - clean) <= cfg.adc.step / 2 + 1e-15)

    def test_device_and_adc_variances_add(self):
        """Test output variance is w^2 sigma^2 + step^2 / 12 with both noises on."""
        sigma, w = 0.05, 1.5
        adc = AdcSpec(v_ref=1.0, bits=3)
        cfg = NoiseConfig(device=DeviceNoiseSpec(sigma), adc=adc, noise_mode="resample")
        # One row per sample: device and ADC draws are independent per element.
        tall = np.full((100_000, 1), w)

        out = noisy_matvec(tall, np.array([1.0]), cfg, RandomStream(8, 0))
        expected = w**2 * sigma**2 + adc.step**2 / 12.0

        assert out.var() == pytest.approx(expected, rel=0.03)
        assert out.mean() == pytest.approx(w, abs=0.002)

    def test_unit_weight_variance_example(self):
        """Test W=[[1]], x=[1], sigma 0.1, ADC off: variance over 10^5 calls near 0.01."""
        cfg = NoiseConfig(device=DeviceNoiseSpec(0.1), adc=AdcSpec(enabled=False), noise_mode="resample")
        w, x = np.array([[1.0]]), np.array([1.0])
        rng = RandomStream(0, 0)

        samples = np.array([noisy_matvec(w, x, cfg, rng)[0] for _ in range(100_000)])

        assert 0.0090 <= samples.var() <= 0.0110

    def test_unbiased_mean_example(self):
        """Test W=[[2]], x=[3], sigma 0.05, ADC off: mean over 10^5 calls is 6 +- 0.01."""
        cfg = NoiseConfig(device=DeviceNoiseSpec(0.05), adc=AdcSpec(enabled=False), noise_mode="resample")
        w, x = np.array([[2.0]]), np.array([3.0])
        rng = RandomStream(1, 0)

        samples = np.array([noisy_matvec(w, x, cfg, rng)[0] for _ in range(100_000)])

        assert abs(samples.mean() - 6.0) <= 0.01
