"""Shared fixtures and numerical helpers for the test suite."""

import numpy as np
import pytest

from gpsurv.data import SurvivalDataset
from gpsurv.inference import HyperParams, ModelKind
from gpsurv.kernels import MultiKernelParams, SingleKernelParams
from gpsurv.timescale import TransformConfig


def fd_gradient(func, f, rel_step=1e-5):
    """Central finite-difference gradient with per-coordinate scaled steps."""
    f = np.asarray(f, dtype=float)
    g = np.empty_like(f)
    for i in range(f.size):
        h = rel_step * max(1.0, abs(f[i]))
        fp = f.copy()
        fm = f.copy()
        fp[i] += h
        fm[i] -= h
        g[i] = (func(fp) - func(fm)) / (2.0 * h)
    return g


def fd_hessdiag(func, f, rel_step=5e-4):
    """Second-order central difference of the diagonal Hessian entries."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    f0 = func(f)
    for i in range(f.size):
        h = rel_step * max(1.0, abs(f[i]))
        fp = f.copy()
        fm = f.copy()
        fp[i] += h
        fm[i] -= h
        out[i] = (func(fp) - 2.0 * f0 + func(fm)) / h**2
    return out


def assert_close_rel(actual, expected, rtol, atol=1e-8):
    np.testing.assert_allclose(actual, expected, rtol=rtol, atol=atol)


def make_right_censored(rng, n=10, d=1, censor=0.4, two_risks=False):
    """Random exact/censored dataset with moderate times."""
    x = rng.uniform(-2.0, 2.0, size=(n, d))
    tau = rng.uniform(0.5, 8.0, size=n)
    if two_risks:
        event = rng.integers(1, 3, size=n)
    else:
        event = np.ones(n, dtype=int)
    censored = rng.uniform(size=n) < censor
    event[censored] = 0
    return SurvivalDataset(x=x, event=event, time=tau, n_risks=2 if two_risks else 1)


def make_interval(rng, n=10, d=1, censor=0.4, width=1.0):
    """Random interval/censored dataset (no exact events)."""
    x = rng.uniform(-2.0, 2.0, size=(n, d))
    tau = rng.uniform(1.5, 8.0, size=n)
    event = np.ones(n, dtype=int)
    event[rng.uniform(size=n) < censor] = 0
    time = np.where(event == 0, tau, np.nan)
    lower = np.where(event == 1, np.maximum(tau - rng.uniform(0, width, size=n), 0.3 * tau), np.nan)
    upper = lower + width
    return SurvivalDataset(x=x, event=event, time=time, t_lower=lower, t_upper=upper)


def aft_theta(rng=None, d=1, eta=1.0, beta=0.6, sigma=1.5, lengthscale=0.8, gamma=1.0):
    return HyperParams(
        kind=ModelKind.AFT,
        eta=eta,
        beta=beta,
        single=SingleKernelParams(sigma=sigma, lengthscales=np.full(d, lengthscale)),
        transform=TransformConfig(gamma),
    )


def competing_theta(d=1, eta=1.0, mu=0.3, beta=0.6, sigma=0.7, omega=0.9, lengthscale=1.0, gamma=1.0):
    return HyperParams(
        kind=ModelKind.COMPETING,
        eta=eta,
        beta=beta,
        multi=MultiKernelParams(
            sigma=sigma, omega=omega, lengthscales=np.full(d, lengthscale), mu=mu
        ),
        transform=TransformConfig(gamma),
    )


def hazard_theta(d=1, sigma=1.2, lengthscale=0.9, nu=1.4):
    return HyperParams(
        kind=ModelKind.HAZARD,
        single=SingleKernelParams(sigma=sigma, lengthscales=np.full(d, lengthscale)),
        nu=nu,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
