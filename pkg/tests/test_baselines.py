import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from conftest import fd_gradient
from gpsurv.baselines import (
    WphmParams,
    fit_wphm,
    wphm_hazard,
    wphm_nll,
    wphm_pdf,
    wphm_predict_mean,
    wphm_survival,
    _value_and_grad,
)
from gpsurv.data import SurvivalDataset
from gpsurv.errors import ValidationError


def weibull_ph_sample(rng, n, beta, rho, nu, censor=0.0, x_low=0.0, x_high=3.0):
    d = len(beta)
    x = rng.uniform(x_low, x_high, size=(n, d))
    z = rng.uniform(size=n)
    tau = rho * (-np.exp(-(x @ np.asarray(beta))) * np.log1p(-z)) ** (1.0 / nu)
    event = np.ones(n, dtype=int)
    idx = rng.choice(n, size=int(censor * n), replace=False)
    event[idx] = 0
    tau[idx] = tau[idx] * rng.uniform(size=idx.size).clip(1e-6, 1 - 1e-9)
    return SurvivalDataset(x=x, event=event, time=tau)


class TestFit:
    def test_recovery(self):
        rng = np.random.default_rng(11)
        truth = dict(beta=[-1.0], rho=10.0, nu=7.0)
        data = weibull_ph_sample(rng, 400, censor=0.15, **truth)
        params = fit_wphm(data)
        assert params.beta[0] == pytest.approx(-1.0, abs=0.15)
        assert params.rho == pytest.approx(10.0, rel=0.15)
        assert params.nu == pytest.approx(7.0, rel=0.15)

    def test_exponential_special_case(self):
        # with beta=0 and nu=1 fixed by the data-generating process, the
        # scale estimate approaches the mean event time under full observation
        rng = np.random.default_rng(12)
        data = weibull_ph_sample(rng, 4000, beta=[0.0], rho=2.0, nu=1.0)
        params = fit_wphm(data)
        assert params.nu == pytest.approx(1.0, abs=0.05)
        assert params.rho == pytest.approx(np.mean(data.time), rel=0.05)

    def test_fit_beats_truth(self):
        rng = np.random.default_rng(13)
        data = weibull_ph_sample(rng, 80, beta=[-0.8], rho=8.0, nu=5.0, censor=0.2)
        fitted = fit_wphm(data)
        assert wphm_nll(fitted, data) <= wphm_nll(
            WphmParams(beta=[-0.8], rho=8.0, nu=5.0), data
        )

    def test_all_censored_unidentifiable(self):
        data = SurvivalDataset(x=[[0.0], [1.0]], event=[0, 0], time=[1.0, 2.0])
        with pytest.raises(ValidationError):
            fit_wphm(data)

    def test_rejects_intervals(self):
        data = SurvivalDataset(
            x=[[0.0]], event=[1], time=[np.nan], t_lower=[1.0], t_upper=[2.0]
        )
        with pytest.raises(ValidationError):
            fit_wphm(data)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(14)
        data = weibull_ph_sample(rng, 40, beta=[-0.5, 0.3], rho=5.0, nu=2.0, censor=0.3)
        xi = np.array([-0.4, 0.2, np.log(4.0), np.log(1.8)])
        _, grad = _value_and_grad(xi, data)
        fd = fd_gradient(lambda v: _value_and_grad(v, data)[0], xi, rel_step=1e-6)
        np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-10)


class TestPredict:
    def test_exponential_mean(self):
        params = WphmParams(beta=[0.0], rho=1.0, nu=1.0)
        mean, var = wphm_predict_mean([0.0], params)
        assert mean == pytest.approx(1.0, rel=1e-8)
        assert var == pytest.approx(1.0, rel=1e-6)

    def test_weibull_moment(self):
        params = WphmParams(beta=[0.0], rho=1.0, nu=2.0)
        mean, _ = wphm_predict_mean([0.0], params)
        assert mean == pytest.approx(gamma_fn(1.5), rel=1e-8)

    def test_closed_form_oracle_random_draws(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            params = WphmParams(
                beta=rng.normal(scale=0.5, size=2),
                rho=float(rng.uniform(0.5, 6.0)),
                nu=float(rng.uniform(0.6, 6.0)),
            )
            x = rng.uniform(-1, 1, size=2)
            mean, _ = wphm_predict_mean(x, params)
            closed = params.rho * np.exp(-(params.beta @ x) / params.nu) * gamma_fn(
                1.0 + 1.0 / params.nu
            )
            assert mean == pytest.approx(closed, rel=1e-6)

    def test_proportional_direction(self):
        params = WphmParams(beta=[0.7], rho=3.0, nu=2.0)
        means = [wphm_predict_mean([x], params)[0] for x in (0.0, 0.5, 1.0)]
        assert means[0] > means[1] > means[2]

    def test_curve_identities(self):
        params = WphmParams(beta=[0.4], rho=2.0, nu=1.5)
        tau = np.linspace(0.1, 8.0, 30)
        x = [0.3]
        pdf = wphm_pdf(tau, x, params)
        surv = wphm_survival(tau, x, params)
        hz = wphm_hazard(tau, x, params)
        np.testing.assert_allclose(pdf, hz * surv, rtol=1e-12)
