import numpy as np
import pytest

from conftest import aft_theta, competing_theta, hazard_theta, make_interval, make_right_censored
from gpsurv.data import SurvivalDataset
from gpsurv.errors import ValidationError
from gpsurv.inference import (
    FLAGGED_NLL,
    HyperParams,
    ModelKind,
    fit_hyperparameters,
    fit_map,
    force_independent,
    laplace_nll_hyp,
)
from gpsurv.kernels import SingleKernelParams, build_gram
from gpsurv.likelihoods import select_nll
from gpsurv.timescale import TransformConfig, from_latent


class TestFitMap:
    def test_single_point_closed_form(self):
        # one exact event: the stationary point is t * sigma / (sigma + beta^2)
        sigma, beta, t_lat = 1.4, 0.6, 1.1
        data = SurvivalDataset(x=[[0.0]], event=[1], time=[from_latent(t_lat, TransformConfig(1.0))])
        theta = aft_theta(eta=0.0, beta=beta, sigma=sigma)
        model = fit_map(data, theta)
        assert model.converged
        expected = t_lat * sigma / (sigma + beta**2)
        assert model.f_hat[0] == pytest.approx(expected, abs=1e-8)

    def test_gradient_tolerance_everywhere(self, rng):
        cases = [
            (make_right_censored(rng, n=12, censor=0.4), aft_theta(eta=0.8)),
            (make_interval(rng, n=10, censor=0.3), aft_theta(eta=1.0)),
            (make_right_censored(rng, n=9, two_risks=True, censor=0.3), competing_theta()),
            (make_right_censored(rng, n=11, censor=0.5), hazard_theta(nu=1.2)),
            (make_interval(rng, n=9, censor=0.4), hazard_theta(nu=0.9)),
        ]
        for data, theta in cases:
            model = fit_map(data, theta)
            assert model.converged, theta.kind
            assert model.final_grad_norm <= 1e-6

    def test_matches_gp_regression_without_censoring(self, rng):
        # all-event data reduces to penalised least squares with the classic
        # posterior-mean solution eta + K (K + beta^2 I)^(-1) (t - eta)
        n = 14
        data = make_right_censored(rng, n=n, censor=0.0)
        theta = aft_theta(eta=1.3, beta=0.5, sigma=2.0, lengthscale=0.9)
        model = fit_map(data, theta)
        t, _, _ = data.latent_times(theta.transform)
        k = model.gram.values + model.gram.jitter * np.eye(n)
        closed = theta.eta + k @ np.linalg.solve(k + theta.beta**2 * np.eye(n), t - theta.eta)
        np.testing.assert_allclose(model.f_hat, closed, atol=1e-6)

    def test_deterministic(self, rng):
        data = make_right_censored(rng, n=10, censor=0.4)
        theta = aft_theta()
        m1 = fit_map(data, theta)
        m2 = fit_map(data, theta)
        assert np.array_equal(m1.f_hat, m2.f_hat)

    def test_objective_decreases_from_start(self, rng):
        data = make_right_censored(rng, n=10, censor=0.4)
        theta = aft_theta(eta=0.5)
        gram = build_gram(data.x, theta.single)
        nll = select_nll("gp-aft", data)
        start = nll(np.full(10, theta.eta), data, theta, gram).value
        model = fit_map(data, theta)
        assert model.nll_value <= start


class TestLaplace:
    def test_dense_oracle(self, rng):
        data = make_right_censored(rng, n=10, censor=0.3)
        theta = aft_theta(eta=0.7, beta=0.5)
        value, model = laplace_nll_hyp(theta, data, return_model=True)
        k = model.gram.values + model.gram.jitter * np.eye(10)
        a = np.linalg.inv(k) + np.diag(model.w_diag)
        expected = (
            model.nll_value
            - 0.5 * np.log(2 * np.pi)
            + np.linalg.slogdet(a)[1] / (2 * data.n)
        )
        assert value == pytest.approx(expected, abs=1e-8)

    def test_permutation_invariance(self, rng):
        data = make_right_censored(rng, n=12, censor=0.4)
        theta = aft_theta(eta=0.6)
        base = laplace_nll_hyp(theta, data)
        perm = rng.permutation(12)
        shuffled = data.subset(perm)
        assert laplace_nll_hyp(theta, shuffled) == pytest.approx(base, rel=1e-10)

    def test_flat_likelihood_limit(self):
        # censoring times far below the prior mean leave W ~ 0, so only the
        # prior terms survive
        n = 5
        data = SurvivalDataset(
            x=np.linspace(-1, 1, n)[:, None], event=np.zeros(n, dtype=int), time=np.full(n, 1e-4)
        )
        theta = aft_theta(eta=40.0, beta=0.4, sigma=1.0, gamma=1.0)
        value, model = laplace_nll_hyp(theta, data, return_model=True)
        assert np.max(model.w_diag) < 1e-200
        expected = model.nll_value - 0.5 * np.log(2 * np.pi) - model.gram.logdet() / (2 * n)
        assert value == pytest.approx(expected, abs=1e-10)

    def test_noise_blowup_increases_objective(self, rng):
        data = make_right_censored(rng, n=12, censor=0.3)
        values = []
        for beta in (1.0, 10.0, 100.0, 1000.0):
            values.append(laplace_nll_hyp(aft_theta(eta=0.8, beta=beta), data))
        assert values[1] < values[2] < values[3]


class TestFitHyperparameters:
    def test_not_worse_than_its_start(self, rng):
        data = make_right_censored(rng, n=15, censor=0.2)
        truth = {"eta": 0.9, "beta": 0.4, "sigma": 1.5, "l1": 0.8}
        hyper, info = fit_hyperparameters(
            data, "gp-aft", transform=TransformConfig(1.0),
            restarts=1, seed=0, initial=truth, maxfev=300, full_output=True,
        )
        start_value = laplace_nll_hyp(
            aft_theta(eta=0.9, beta=0.4, sigma=1.5, lengthscale=0.8), data
        )
        assert info["value"] <= start_value + 1e-12

    def test_reproducible(self, rng):
        data = make_right_censored(rng, n=10, censor=0.3)
        h1 = fit_hyperparameters(data, "gp-aft", restarts=2, seed=7, maxfev=60)
        h2 = fit_hyperparameters(data, "gp-aft", restarts=2, seed=7, maxfev=60)
        assert h1.eta == h2.eta and h1.beta == h2.beta
        assert h1.single.sigma == h2.single.sigma
        np.testing.assert_array_equal(h1.single.lengthscales, h2.single.lengthscales)

    def test_fixed_pins_omega(self, rng):
        data = make_right_censored(rng, n=8, two_risks=True, censor=0.2)
        hyper = fit_hyperparameters(
            data, "gp-competing", restarts=1, seed=1, maxfev=40, fixed={"omega": 0.0}
        )
        assert hyper.multi.omega == 0.0
        gram = build_gram(data.x, hyper.multi)
        assert np.all(gram.values[:8, 8:] == 0.0)

    def test_restart_validation(self, rng):
        data = make_right_censored(rng, n=6)
        with pytest.raises(ValidationError):
            fit_hyperparameters(data, "gp-aft", restarts=0)


class TestForceIndependent:
    def test_pins_omega(self):
        theta = competing_theta(omega=1.7)
        out = force_independent(theta)
        assert out.multi.omega == 0.0
        assert theta.multi.omega == 1.7  # original untouched

    def test_wrong_kind(self):
        with pytest.raises(ValidationError):
            force_independent(aft_theta())


class TestHyperParamsValidation:
    def test_aft_requires_beta_and_kernel(self):
        with pytest.raises(ValidationError):
            HyperParams(kind="gp-aft", beta=0.0, single=SingleKernelParams(1.0, [1.0]))
        with pytest.raises(ValidationError):
            HyperParams(kind="gp-aft", beta=1.0)

    def test_hazard_zero_mean(self):
        theta = HyperParams(
            kind=ModelKind.HAZARD, eta=5.0, single=SingleKernelParams(1.0, [1.0]), nu=1.0
        )
        assert theta.eta == 0.0

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            HyperParams(kind="cox", beta=1.0)
