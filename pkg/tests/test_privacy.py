"""Unit tests for reap.privacy."""

from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from reap.exceptions import DomainError
from reap.models import LaplaceScale, PplLevel, SensingContext
from reap.privacy import (
    accuracy_from_weights,
    calibrate_laplace,
    chebyshev_error_bound,
    laplace_from_uniform,
    laplace_noise,
    perturb,
    predicted_accuracy,
    sample_laplace,
)


class TestCalibrateLaplace:
    """Unit tests for calibrate_laplace()."""

    def test_scale_is_range_over_epsilon(self) -> None:
        assert calibrate_laplace(10.0, PplLevel(epsilon=2.0)).b == pytest.approx(5.0)

    def test_smaller_epsilon_means_more_noise(self) -> None:
        strong = calibrate_laplace(10.0, PplLevel(epsilon=0.5))
        weak = calibrate_laplace(10.0, PplLevel(epsilon=5.0))
        assert strong.b > weak.b

    def test_non_positive_gamma_raises(self) -> None:
        with pytest.raises(DomainError) as excinfo:
            calibrate_laplace(0.0, PplLevel(epsilon=1.0))
        assert excinfo.value.field == "gamma"

    def test_non_positive_epsilon_rejected_by_model(self) -> None:
        with pytest.raises(ValidationError):
            PplLevel(epsilon=0.0)


class TestLaplaceSampling:
    """Inverse-CDF Laplace sampling."""

    def test_median_uniform_maps_to_zero(self) -> None:
        assert float(laplace_from_uniform(0.5, 3.0)) == 0.0

    def test_inverse_cdf_is_antisymmetric(self) -> None:
        upper = float(laplace_from_uniform(0.75, 2.0))
        lower = float(laplace_from_uniform(0.25, 2.0))
        assert upper == pytest.approx(2.0 * math.log(2.0))
        assert lower == pytest.approx(-upper)

    def test_zero_uniform_stays_finite(self) -> None:
        assert np.isfinite(laplace_from_uniform(0.0, 1.0))

    def test_sample_variance_matches_two_b_squared(self) -> None:
        rng = np.random.default_rng(7)
        draws = laplace_noise(np.full(200_000, 1.5), rng)
        assert draws.mean() == pytest.approx(0.0, abs=0.02)
        assert draws.var() == pytest.approx(2.0 * 1.5**2, rel=0.02)

    def test_per_entry_scales(self) -> None:
        rng = np.random.default_rng(3)
        draws = laplace_noise(np.array([1e-12, 100.0]), rng)
        assert abs(draws[0]) < 1e-9

    def test_same_seed_same_sample(self) -> None:
        scale = LaplaceScale(b=4.0)
        a = sample_laplace(scale, np.random.default_rng(11))
        b = sample_laplace(scale, np.random.default_rng(11))
        assert a == b


class TestPerturb:
    """Unit tests for perturb()."""

    def test_forced_noise_is_added(self) -> None:
        reading = perturb(2.0, LaplaceScale(b=1.0), np.random.default_rng(0), noise=1.5)
        assert reading.noisy == pytest.approx(3.5)
        assert reading.noise == pytest.approx(1.5)
        assert reading.raw == 2.0

    def test_readings_are_not_clipped(self) -> None:
        reading = perturb(50.0, LaplaceScale(b=1.0), np.random.default_rng(0), noise=-100.0)
        assert reading.noisy == pytest.approx(-50.0)


class TestPredictedAccuracy:
    """Predicted accuracy α for a set of privacy levels."""

    def test_two_users_unit_epsilon(self) -> None:
        ctx = SensingContext(gamma=10.0, delta=0.9, n=2)
        alpha = predicted_accuracy(ctx, [PplLevel(epsilon=1.0)] * 2)
        assert alpha == pytest.approx(math.sqrt(1000.0))

    def test_more_privacy_means_less_accuracy(self) -> None:
        ctx = SensingContext(gamma=10.0, delta=0.9, n=3)
        loose = predicted_accuracy(ctx, [PplLevel(epsilon=2.0)] * 3)
        tight = predicted_accuracy(ctx, [PplLevel(epsilon=0.5)] * 3)
        assert tight > loose

    def test_length_mismatch_raises(self) -> None:
        ctx = SensingContext(gamma=10.0, delta=0.9, n=3)
        with pytest.raises(DomainError):
            predicted_accuracy(ctx, [PplLevel(epsilon=1.0)] * 2)

    def test_fractional_population_allowed(self) -> None:
        alpha = accuracy_from_weights(10.0, 0.9, 2.5, 4.0)
        assert alpha == pytest.approx(math.sqrt(2.0) * 10.0 / (2.5 * math.sqrt(0.1)) * 2.0)

    def test_delta_one_raises(self) -> None:
        with pytest.raises(DomainError):
            accuracy_from_weights(10.0, 1.0, 2.0, 1.0)


class TestChebyshevBound:
    """Unit tests for chebyshev_error_bound()."""

    def test_bound_equals_one_minus_delta_at_predicted_alpha(self) -> None:
        ctx = SensingContext(gamma=10.0, delta=0.9, n=4)
        ppls = [PplLevel(epsilon=e) for e in (0.5, 1.0, 2.0, 4.0)]
        alpha = predicted_accuracy(ctx, ppls)
        scales = [calibrate_laplace(ctx.gamma, p) for p in ppls]
        assert chebyshev_error_bound(ctx, scales, alpha) == pytest.approx(0.1)

    def test_bound_is_clamped_to_one(self) -> None:
        ctx = SensingContext(gamma=10.0, delta=0.9, n=1)
        assert chebyshev_error_bound(ctx, [LaplaceScale(b=10.0)], 1e-3) == 1.0

    def test_non_positive_alpha_raises(self) -> None:
        ctx = SensingContext(gamma=10.0, delta=0.9, n=1)
        with pytest.raises(DomainError) as excinfo:
            chebyshev_error_bound(ctx, [LaplaceScale(b=1.0)], 0.0)
        assert excinfo.value.field == "alpha"
