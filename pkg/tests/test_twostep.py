import numpy as np
import pytest

from crosspec.kron import LeadField
from crosspec.spectral import TimeSeriesSet, WelchConfig, welch_cross_spectrum
from crosspec.twostep import (
    TikhonovConfig,
    default_lambda_grid,
    normalize_observations,
    tikhonov_estimate,
    two_step_cps,
)


def make_series(samples, fs=256.0):
    return TimeSeriesSet(np.asarray(samples, dtype=float), fs)


class TestTikhonovEstimate:
    def test_identity_operator_small_lambda(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal((50, 3))
        out = tikhonov_estimate(LeadField(np.eye(3)), make_series(y), 1e-12)
        np.testing.assert_allclose(out.samples, y, rtol=1e-10)

    def test_overregularization_kills_estimate(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal((50, 3))
        out = tikhonov_estimate(LeadField(np.eye(3)), make_series(y), 1e12)
        assert np.max(np.abs(out.samples)) < 1e-10

    def test_scalar_filter_factor(self):
        lead = LeadField(np.array([[2.0]]))
        series = make_series(np.array([[6.0], [6.0]]))
        out = tikhonov_estimate(lead, series, 2.0)
        np.testing.assert_allclose(out.samples, 2.0 * np.ones((2, 1)), rtol=1e-14)

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ValueError):
            tikhonov_estimate(LeadField(np.eye(2)), make_series(np.zeros((5, 2))), 0.0)

    def test_channel_mismatch(self):
        with pytest.raises(ValueError):
            tikhonov_estimate(LeadField(np.eye(3)), make_series(np.zeros((5, 2))), 1.0)

    def test_filter_factor_identity_vs_normal_equations(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            m = int(rng.integers(1, 11))
            n = int(rng.integers(1, 11))
            g = rng.standard_normal((m, n))
            lam = float(rng.uniform(0.05, 5.0))
            y = rng.standard_normal((7, m))
            est = tikhonov_estimate(LeadField(g), make_series(y), lam).samples
            direct = np.linalg.solve(g.T @ g + lam * np.eye(n), g.T @ y.T).T
            np.testing.assert_allclose(est, direct, rtol=1e-8, atol=1e-10)

    def test_monotone_shrinkage(self):
        rng = np.random.default_rng(3)
        g = rng.standard_normal((4, 6))
        y = rng.standard_normal((1, 4))
        norms = [
            np.linalg.norm(tikhonov_estimate(LeadField(g), make_series(np.vstack([y, y])), lam).samples[0])
            for lam in (0.01, 0.1, 1.0, 10.0, 100.0)
        ]
        assert all(a >= b for a, b in zip(norms, norms[1:]))

    def test_linearity(self):
        rng = np.random.default_rng(4)
        g = rng.standard_normal((3, 5))
        y = rng.standard_normal((10, 3))
        base = tikhonov_estimate(LeadField(g), make_series(y), 0.5).samples
        scaled = tikhonov_estimate(LeadField(g), make_series(3.0 * y), 0.5).samples
        np.testing.assert_allclose(scaled, 3.0 * base, rtol=1e-12)


class TestTwoStepCps:
    def test_zero_observations(self):
        cfg = WelchConfig(64, 0.5, 256.0)
        out = two_step_cps(LeadField(np.eye(2)), make_series(np.zeros((500, 2))), 1.0, cfg, 10)
        np.testing.assert_array_equal(out.matrix, np.zeros((2, 2)))

    def test_identity_small_lambda_equals_sensor_spectrum(self):
        rng = np.random.default_rng(5)
        y = rng.standard_normal((2000, 2))
        cfg = WelchConfig(128, 0.5, 256.0)
        series = make_series(y)
        composed = two_step_cps(LeadField(np.eye(2)), series, 1e-12, cfg, 9)
        sensor = welch_cross_spectrum(series, cfg, 9)
        np.testing.assert_allclose(composed.matrix, sensor.matrix, rtol=1e-8)

    def test_composition_contract(self):
        rng = np.random.default_rng(6)
        g = rng.standard_normal((4, 6))
        y = rng.standard_normal((1500, 4))
        cfg = WelchConfig(128, 0.5, 256.0)
        series = make_series(y)
        composed = two_step_cps(LeadField(g), series, 0.7, cfg, 20)
        manual = welch_cross_spectrum(
            tikhonov_estimate(LeadField(g), series, 0.7), cfg, 20
        )
        np.testing.assert_array_equal(composed.matrix, manual.matrix)


class TestDefaultLambdaGrid:
    def test_zero_snr(self):
        np.testing.assert_allclose(default_lambda_grid(0.0), [0.1, 1.0, 10.0, 100.0])

    def test_five_db(self):
        expected = np.array([0.1, 1.0, 10.0, 100.0]) * 10 ** (-0.5)
        np.testing.assert_allclose(default_lambda_grid(5.0), expected)
        assert default_lambda_grid(5.0)[0] == pytest.approx(0.0316, rel=1e-2)

    def test_ten_db(self):
        np.testing.assert_allclose(default_lambda_grid(10.0), [0.01, 0.1, 1.0, 10.0])


class TestNormalization:
    def test_unit_mean_variance(self):
        rng = np.random.default_rng(7)
        y = 5.0 * rng.standard_normal((4000, 3))
        scaled, divisor = normalize_observations(make_series(y))
        assert np.mean(np.var(scaled.samples, axis=0)) == pytest.approx(1.0)
        assert divisor == pytest.approx(np.sqrt(np.mean(np.var(y, axis=0))))

    def test_zero_series_untouched(self):
        series = make_series(np.zeros((10, 2)))
        scaled, divisor = normalize_observations(series)
        assert divisor == 1.0
        np.testing.assert_array_equal(scaled.samples, series.samples)


class TestTikhonovConfig:
    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            TikhonovConfig(lam=1.0, parameter_grid=(1.0, -2.0))
