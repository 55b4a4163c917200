"""Reproducible synthetic-data generators.

Three families: latent-GP single risk, latent-GP competing risks (two
outputs drawn jointly from the block covariance) and Weibull proportional
hazards (inverse-CDF sampling).  Censoring follows the same recipe in all
three: a random subset of ``floor(censor_fraction * n)`` subjects is
censored at a uniform draw on ``[0, tau_i)``, then an optional end-of-trial
cutoff converts any remaining later events into censorings at the cutoff.

All draws flow through one counter-based Philox generator seeded from the
spec, in a fixed order (covariates, latent values, observation noise,
censoring subset, censoring times), so identical specs give bit-identical
datasets.  Validation points, when requested, are drawn jointly with the
training points from the same latent function and recorded uncensored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import WphmParams
from .data import SurvivalDataset
from .errors import ValidationError
from .inference import HyperParams, ModelKind
from .timescale import from_latent

__all__ = ["SimSpec", "SimResult", "simulate", "simulate_gp_single",
           "simulate_gp_competing", "simulate_wphm", "intervalize"]

_KINDS = ("gp-single", "gp-competing", "wphm")


@dataclass
class SimSpec:
    kind: str
    n: int
    box: np.ndarray  # (d, 2) low/high per covariate dimension
    params: object  # HyperParams for the GP kinds, WphmParams for "wphm"
    censor_fraction: float = 0.0
    end_of_trial: float | None = None
    seed: int = 0
    n_validation: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        self.n = int(self.n)
        self.n_validation = int(self.n_validation)
        if self.n < 1 or self.n_validation < 0:
            raise ValidationError("need n >= 1 and n_validation >= 0")
        self.box = np.atleast_2d(np.asarray(self.box, dtype=float))
        if self.box.ndim != 2 or self.box.shape[1] != 2 or np.any(self.box[:, 0] >= self.box[:, 1]):
            raise ValidationError("box must be (d, 2) with low < high per dimension")
        self.censor_fraction = float(self.censor_fraction)
        if not 0.0 <= self.censor_fraction < 1.0:
            raise ValidationError("censor_fraction must lie in [0, 1)")
        if self.end_of_trial is not None and not self.end_of_trial > 0.0:
            raise ValidationError("end_of_trial must be positive")
        if self.kind == "wphm":
            if not isinstance(self.params, WphmParams):
                raise ValidationError("wphm simulation needs WphmParams")
        else:
            want = ModelKind.AFT if self.kind == "gp-single" else ModelKind.COMPETING
            if not isinstance(self.params, HyperParams) or self.params.kind is not want:
                raise ValidationError(f"{self.kind} simulation needs HyperParams of kind {want.value}")

    @property
    def dim(self) -> int:
        return self.box.shape[0]


@dataclass
class SimResult:
    data: SurvivalDataset
    f_true: np.ndarray  # (n,) or (2, n)
    tau_true: np.ndarray  # (n,) or (2, n)
    spec: SimSpec
    validation: SurvivalDataset | None = None
    f_val: np.ndarray | None = None
    tau_val: np.ndarray | None = None


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _draw_covariates(rng, spec, n_total):
    return rng.uniform(spec.box[:, 0], spec.box[:, 1], size=(n_total, spec.dim))


def _censor(rng, tau_obs, event, time, spec):
    """Random-subset censoring followed by the end-of-trial cutoff."""
    n = spec.n
    k = int(np.floor(spec.censor_fraction * n))
    if k > 0:
        idx = rng.choice(n, size=k, replace=False)
        draws = tau_obs[idx] * rng.uniform(size=k)
        event[idx] = 0
        time[idx] = np.maximum(draws, tau_obs[idx] * 1e-12)
    if spec.end_of_trial is not None:
        late = (event > 0) & (time > spec.end_of_trial)
        event[late] = 0
        time[late] = spec.end_of_trial
    return event, time


def simulate_gp_single(spec: SimSpec) -> SimResult:
    """Latent-GP accelerated failure-time data with right censoring."""
    if spec.kind != "gp-single":
        raise ValidationError(f"expected a gp-single spec, got {spec.kind!r}")
    hyper: HyperParams = spec.params
    rng = _rng(spec.seed)
    n, n_total = spec.n, spec.n + spec.n_validation

    x = _draw_covariates(rng, spec, n_total)
    gram = hyper.build_gram(x)
    f = hyper.eta + gram.chol @ rng.standard_normal(n_total)
    t = f + hyper.beta * rng.standard_normal(n_total)
    tau = from_latent(t, hyper.transform)

    event = np.ones(n, dtype=int)
    time = tau[:n].copy()
    event, time = _censor(rng, tau[:n], event, time, spec)
    data = SurvivalDataset(x=x[:n], event=event, time=time)

    validation = f_val = tau_val = None
    if spec.n_validation:
        validation = SurvivalDataset(
            x=x[n:], event=np.ones(spec.n_validation, dtype=int), time=tau[n:]
        )
        f_val, tau_val = f[n:], tau[n:]
    return SimResult(data=data, f_true=f[:n], tau_true=tau[:n], spec=spec,
                     validation=validation, f_val=f_val, tau_val=tau_val)


def simulate_gp_competing(spec: SimSpec) -> SimResult:
    """Two-risk data from the joint two-output GP prior.

    Each subject gets two latent times; the observed record is the earlier
    one with its risk label (the other is known only to come later), before
    censoring is applied on top.
    """
    if spec.kind != "gp-competing":
        raise ValidationError(f"expected a gp-competing spec, got {spec.kind!r}")
    hyper: HyperParams = spec.params
    rng = _rng(spec.seed)
    n, n_total = spec.n, spec.n + spec.n_validation

    x = _draw_covariates(rng, spec, n_total)
    gram = hyper.build_gram(x)  # 2 * n_total, block layout [f1; f2]
    f = hyper.eta + gram.chol @ rng.standard_normal(2 * n_total)
    t = f + hyper.beta * rng.standard_normal(2 * n_total)
    f_pair = f.reshape(2, n_total)
    tau_pair = from_latent(t, hyper.transform).reshape(2, n_total)

    first = np.argmin(tau_pair, axis=0)
    tau_obs = tau_pair[first, np.arange(n_total)]
    labels = first + 1

    event = labels[:n].astype(int).copy()
    time = tau_obs[:n].copy()
    event, time = _censor(rng, tau_obs[:n], event, time, spec)
    data = SurvivalDataset(x=x[:n], event=event, time=time, n_risks=2)

    validation = f_val = tau_val = None
    if spec.n_validation:
        validation = SurvivalDataset(
            x=x[n:], event=labels[n:].astype(int), time=tau_obs[n:], n_risks=2
        )
        f_val, tau_val = f_pair[:, n:], tau_pair[:, n:]
    return SimResult(data=data, f_true=f_pair[:, :n], tau_true=tau_pair[:, :n], spec=spec,
                     validation=validation, f_val=f_val, tau_val=tau_val)


def simulate_wphm(spec: SimSpec) -> SimResult:
    """Weibull proportional-hazards data by inverse-CDF sampling.

    ``tau = rho * (-exp(-beta.x) * log(1 - z)) ** (1/nu)`` with z uniform.
    """
    if spec.kind != "wphm":
        raise ValidationError(f"expected a wphm spec, got {spec.kind!r}")
    params: WphmParams = spec.params
    rng = _rng(spec.seed)
    n, n_total = spec.n, spec.n + spec.n_validation

    x = _draw_covariates(rng, spec, n_total)
    z = rng.uniform(size=n_total)
    tau = params.rho * (-np.exp(-(x @ params.beta)) * np.log1p(-z)) ** (1.0 / params.nu)

    event = np.ones(n, dtype=int)
    time = tau[:n].copy()
    event, time = _censor(rng, tau[:n], event, time, spec)
    data = SurvivalDataset(x=x[:n], event=event, time=time)

    validation = tau_val = None
    if spec.n_validation:
        validation = SurvivalDataset(
            x=x[n:], event=np.ones(spec.n_validation, dtype=int), time=tau[n:]
        )
        tau_val = tau[n:]
    return SimResult(data=data, f_true=x[:n] @ params.beta, tau_true=tau[:n], spec=spec,
                     validation=validation, f_val=None, tau_val=tau_val)


def simulate(spec: SimSpec) -> SimResult:
    """Dispatch on ``spec.kind``."""
    return {
        "gp-single": simulate_gp_single,
        "gp-competing": simulate_gp_competing,
        "wphm": simulate_wphm,
    }[spec.kind](spec)


def intervalize(data: SurvivalDataset, width: float, seed: int = 0) -> SurvivalDataset:
    """Replace each exact event by a random interval of the given width containing it.

    The event at ``tau`` becomes ``(tau - u, tau - u + width)`` with ``u``
    uniform on ``[0, width]``; the lower bound is clipped to ``0.5 * tau``
    so it stays strictly positive (the interval still contains ``tau``).
    Censored records pass through untouched.
    """
    if not width > 0.0:
        raise ValidationError("interval width must be positive")
    if data.has_intervals:
        raise ValidationError("dataset already contains interval records")
    if int(data.event.max(initial=0)) > 1:
        raise ValidationError("intervalize expects single-risk data")
    rng = _rng(seed)
    ev = data.is_exact_event
    tau = data.time[ev]
    u = width * rng.uniform(size=tau.size)
    lower = np.maximum(tau - u, 0.5 * tau)
    upper = lower + width

    time = data.time.copy()
    t_lower = np.full(data.n, np.nan)
    t_upper = np.full(data.n, np.nan)
    time[ev] = np.nan
    t_lower[ev] = lower
    t_upper[ev] = upper
    return SurvivalDataset(
        x=data.x, event=data.event.copy(), time=time, t_lower=t_lower, t_upper=t_upper
    )
