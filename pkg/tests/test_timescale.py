import numpy as np
import pytest

from gpsurv.errors import ValidationError
from gpsurv.timescale import (
    TransformConfig,
    default_transform,
    from_latent,
    log_jacobian,
    to_latent,
)


class TestToLatent:
    def test_unit_point(self):
        # exp(ln 2) - 1 = 1, so the latent value is exactly 0
        assert to_latent(np.log(2.0), TransformConfig(1.0)) == pytest.approx(0.0, abs=1e-15)

    def test_direct_evaluation(self):
        # tau=20, gamma=2: log(exp(10) - 1), slightly below 10
        got = to_latent(20.0, TransformConfig(2.0))
        expected = float(np.log(np.exp(10.0) - 1.0))
        assert got == pytest.approx(expected, rel=1e-14)
        assert 10.0 - got < 1e-4

    def test_rejects_nonpositive(self):
        cfg = TransformConfig(1.0)
        with pytest.raises(ValidationError):
            to_latent(0.0, cfg)
        with pytest.raises(ValidationError):
            to_latent(-3.0, cfg)

    def test_no_overflow_far_out(self):
        cfg = TransformConfig(0.5)
        t = to_latent(1e6, cfg)
        assert np.isfinite(t)
        assert t == pytest.approx(2e6, rel=1e-12)


class TestFromLatent:
    def test_zero(self):
        assert from_latent(0.0, TransformConfig(1.0)) == pytest.approx(np.log(2.0), rel=1e-15)

    def test_strictly_positive_for_negative_latent(self):
        val = from_latent(-30.0, TransformConfig(1.0))
        assert val > 0.0
        assert val == pytest.approx(np.log1p(np.exp(-30.0)), rel=1e-12)

    def test_linear_asymptote(self):
        assert from_latent(50.0, TransformConfig(3.0)) == pytest.approx(150.0, rel=1e-9)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValidationError):
            from_latent(np.inf, TransformConfig(1.0))


class TestJacobian:
    def test_closed_form_point(self):
        # at tau = gamma*ln 2 the derivative is 2/gamma
        for gamma in (0.25, 1.0, 3.0):
            cfg = TransformConfig(gamma)
            got = log_jacobian(gamma * np.log(2.0), cfg)
            assert got == pytest.approx(np.log(2.0 / gamma), rel=1e-12)

    def test_linear_regime(self):
        cfg = TransformConfig(0.7)
        assert log_jacobian(1e4, cfg) == pytest.approx(-np.log(0.7), rel=1e-12)

    def test_diverges_at_origin(self):
        cfg = TransformConfig(1.0)
        assert log_jacobian(1e-280, cfg) > 500.0


class TestProperties:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for gamma in (0.05, 1.0, 12.0):
            cfg = TransformConfig(gamma)
            tau = gamma * 10.0 ** rng.uniform(-6, 6, size=200)
            back = from_latent(to_latent(tau, cfg), cfg)
            np.testing.assert_allclose(back, tau, rtol=1e-9)

    def test_monotone(self):
        cfg = TransformConfig(0.8)
        rng = np.random.default_rng(1)
        tau = np.sort(rng.uniform(1e-4, 50.0, size=500))
        t = to_latent(tau, cfg)
        assert np.all(np.diff(t) > 0)

    def test_jacobian_matches_finite_difference(self):
        cfg = TransformConfig(0.9)
        rng = np.random.default_rng(2)
        tau = 0.9 * 10.0 ** rng.uniform(-2, 2, size=100)
        step = 1e-6 * tau
        fd = (to_latent(tau + step, cfg) - to_latent(tau - step, cfg)) / (2 * step)
        np.testing.assert_allclose(np.exp(log_jacobian(tau, cfg)), fd, rtol=1e-6)

    def test_linear_regime_bound(self):
        cfg = TransformConfig(0.3)
        tau = np.linspace(10 * 0.3 + 1e-9, 100.0, 50)
        assert np.max(np.abs(to_latent(tau, cfg) - tau / 0.3)) < 1e-4


class TestConfig:
    def test_rejects_bad_gamma(self):
        for bad in (0.0, -1.0, np.nan, np.inf):
            with pytest.raises(ValidationError):
                TransformConfig(bad)

    def test_default_transform_halves_minimum(self):
        cfg = default_transform([4.0, 2.0, 10.0])
        assert cfg.gamma == pytest.approx(1.0)
        with pytest.raises(ValidationError):
            default_transform([])
        with pytest.raises(ValidationError):
            default_transform([1.0], fraction=1.5)
