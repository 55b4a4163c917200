"""Negative log posteriors, gradients and curvature diagonals.

Four model families share this module:

* Gaussian regression on the latent time axis with right censoring
  (``nll_single``) or interval censoring (``nll_interval``),
* the two-output competing-risks version (``nll_competing``),
* a hazard-rate model with Weibull base hazard and a log-hazard GP, right
  censored (``nll_gp_hazard``) or interval censored
  (``nll_gp_hazard_interval``).

Every function returns an :class:`NllReport` with the objective value, its
analytic gradient with respect to the latent vector, and the diagonal of
``W``, the negative second derivative of the *data* log likelihood.  The
Gaussian survival terms are evaluated through the complementary error
function with an asymptotic expansion deep in the tail; see
:func:`hazard_ratio`, :func:`log_survival_gauss` and
:func:`stable_log_diff_exp` for the numerically delicate pieces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx

from .errors import ValidationError, WrongLikelihoodError

__all__ = [
    "NllReport",
    "hazard_ratio",
    "log_survival_gauss",
    "stable_log_diff_exp",
    "nll_single",
    "nll_interval",
    "nll_competing",
    "nll_gp_hazard",
    "nll_gp_hazard_interval",
    "select_nll",
]

#: switch point for the erfc asymptotic expansion
_H_SWITCH = 20.0
#: switch point for the stable log-of-difference-of-exponentials
_LOG_DIFF_CUTOFF = 10.0

_LOG_2PI = float(np.log(2.0 * np.pi))
_LOG_2_SQRT_PI = float(np.log(2.0 * np.sqrt(np.pi)))


@dataclass
class NllReport:
    """Objective value, gradient and data-curvature diagonal at one point."""

    value: float
    grad: np.ndarray
    w_diag: np.ndarray


# ---------------------------------------------------------------------------
# stable special functions
# ---------------------------------------------------------------------------


def _series(h):
    """Bracketed factor of the erfc asymptotic expansion, four terms.

    Coefficients are the double factorials (2k-1)!! = 1, 1, 3, 15 of the
    standard expansion; four terms keep the truncation error below 3e-10
    relative at the h = 20 switch point.
    """
    u = 1.0 / (2.0 * h * h)
    return 1.0 - u + 3.0 * u * u - 15.0 * u * u * u


def hazard_ratio(h):
    """``exp(-h^2) / erfc(h)``, stable over the whole real line.

    Up to ``h = 20`` the scaled complementary error function gives the exact
    value; beyond that both numerator and denominator underflow, so the
    four-term asymptotic expansion ``h*sqrt(pi) / (1 - 1/(2h^2) + ...)`` is
    used instead.  Tends to 0 as ``h -> -inf`` and grows linearly for large
    positive ``h``.
    """
    h_in = np.asarray(h, dtype=float)
    h = np.atleast_1d(h_in)
    out = np.empty_like(h)
    hi = h > _H_SWITCH
    lo = ~hi
    out[lo] = 1.0 / erfcx(h[lo])
    if hi.any():
        hh = h[hi]
        out[hi] = hh * np.sqrt(np.pi) / _series(hh)
    return out if h_in.ndim else float(out[0])


def _log_half_erfc(h):
    """``log(erfc(h)/2)`` with full relative accuracy in both tails."""
    h = np.asarray(h, dtype=float)
    out = np.empty_like(h)
    neg = h <= 0.0
    mid = (h > 0.0) & (h <= _H_SWITCH)
    hi = h > _H_SWITCH
    # for h <= 0 the value is tiny in magnitude; difference from 1 first
    out[neg] = np.log1p(-0.5 * erfc(-h[neg]))
    out[mid] = np.log(0.5 * erfc(h[mid]))
    if hi.any():
        hh = h[hi]
        out[hi] = -hh * hh - np.log(hh) - _LOG_2_SQRT_PI + np.log(_series(hh))
    return out


def log_survival_gauss(t, f, beta):
    """Log Gaussian survival ``log P(T > t)`` for ``T ~ Normal(f, beta^2)``.

    Equals ``log(erfc(h)/2)`` with ``h = (t - f) / (beta*sqrt(2))``; the deep
    right tail (h > 20) switches to the asymptotic expansion and the left
    tail is evaluated as ``log1p`` of the complementary mass so that values
    like 1e-45 keep full relative accuracy.
    """
    beta = float(beta)
    if not beta > 0.0:
        raise ValidationError(f"beta must be positive, got {beta!r}")
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    h = (t - f) / (beta * np.sqrt(2.0))
    out = _log_half_erfc(np.atleast_1d(h))
    return out if h.ndim else float(out[0])


def stable_log_diff_exp(x1, x2):
    """``log(exp(-x1) - exp(-x2))`` for ``x2 > x1``.

    Uses ``-x1 + log(1 - exp(x1 - x2))`` while ``x1 - x2 >= -10`` and the
    two-term expansion ``-x1 - exp(x1-x2) - exp(2*(x1-x2))/2`` beyond, where
    the log1p path would just return ``-x1`` anyway.
    """
    x1_in = np.asarray(x1, dtype=float)
    x1, x2 = np.broadcast_arrays(np.atleast_1d(x1_in), np.atleast_1d(np.asarray(x2, dtype=float)))
    if np.any(~(x2 > x1)):
        raise ValidationError("stable_log_diff_exp requires x2 > x1 elementwise")
    delta = x2 - x1  # > 0
    near = delta <= _LOG_DIFF_CUTOFF
    out = np.empty_like(delta)
    out[near] = -x1[near] + np.log(-np.expm1(-delta[near]))
    far = ~near
    if far.any():
        e = np.exp(-delta[far])
        out[far] = -x1[far] - e - 0.5 * e * e
    return out if x1_in.ndim else float(out[0])


# ---------------------------------------------------------------------------
# signed log-scale arithmetic for erfc-difference ratios
# ---------------------------------------------------------------------------


def _signed_log_sub(la, lb):
    """Represent ``exp(la) - exp(lb)`` as (sign, log|.|), elementwise."""
    la = np.asarray(la, dtype=float)
    lb = np.asarray(lb, dtype=float)
    sign = np.where(la > lb, 1.0, np.where(la < lb, -1.0, 0.0))
    hi = np.maximum(la, lb)
    lo = np.minimum(la, lb)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = hi + np.log(-np.expm1(lo - hi))
    mag = np.where(sign == 0.0, -np.inf, mag)
    return sign, mag


def _signed_log_diff(sa, la, sb, lb):
    """``a - b`` for ``a = sa*exp(la)``, ``b = sb*exp(lb)`` in signed log form."""
    same = sa * sb > 0.0
    sub_sign, sub_mag = _signed_log_sub(la, lb)
    add_mag = np.logaddexp(la, lb)
    sign = np.where(same, sa * sub_sign, np.where(sa != 0.0, sa, -sb))
    mag = np.where(same, sub_mag, np.where(sa * sb < 0.0, add_mag, np.where(sa != 0.0, la, lb)))
    return sign, mag


def _dlog_survival_df(h, beta):
    """d/df of the Gaussian log survival: ``sqrt(2/pi)/beta * hazard_ratio(h)``."""
    return np.sqrt(2.0 / np.pi) / beta * hazard_ratio(h)


def _w_censored(h, beta):
    """Curvature ``-d2/df2 log S(t|f)`` for a right-censored Gaussian term.

    Equal to ``g^2 - (sqrt(2)h/beta) g`` with ``g`` the log-survival slope;
    nonnegative by log concavity.  Past the series switch the difference is
    rearranged so the two nearly equal terms never cancel.
    """
    h = np.asarray(h, dtype=float)
    g = _dlog_survival_df(h, beta)
    out = np.empty_like(h)
    hi = h > _H_SWITCH
    lo = ~hi
    out[lo] = g[lo] * (g[lo] - np.sqrt(2.0) * h[lo] / beta)
    if hi.any():
        hh = h[hi]
        u = 1.0 / (2.0 * hh * hh)
        defect = u - 3.0 * u * u + 15.0 * u**3  # 1 - series, computed directly
        out[hi] = g[hi] * (np.sqrt(2.0) * hh / beta) * defect / _series(hh)
    return out


def _interval_terms_gauss(t_lower, t_upper, f, beta):
    """Value, d/df and W of ``log[S(t_lower|f) - S(t_upper|f)]`` per row."""
    root2 = np.sqrt(2.0)
    hl = (t_lower - f) / (beta * root2)
    hu = (t_upper - f) / (beta * root2)
    log_sl = _log_half_erfc(hl)
    log_su = _log_half_erfc(hu)
    log_psi = stable_log_diff_exp(-log_sl, -log_su)
    den_log = np.log(2.0) + log_psi  # log(erfc(hl) - erfc(hu))

    s1, m1 = _signed_log_sub(-hl * hl, -hu * hu)
    ratio1 = s1 * np.exp(m1 - den_log)
    dlog = np.sqrt(2.0 / np.pi) / beta * ratio1

    with np.errstate(divide="ignore"):
        la = np.log(np.abs(hl)) - hl * hl
        lb = np.log(np.abs(hu)) - hu * hu
    s2, m2 = _signed_log_diff(np.sign(hl), la, np.sign(hu), lb)
    ratio2 = s2 * np.exp(m2 - den_log)
    w = dlog * dlog - 2.0 / (np.sqrt(np.pi) * beta * beta) * ratio2
    return log_psi, dlog, w


# ---------------------------------------------------------------------------
# model-family likelihoods
# ---------------------------------------------------------------------------


def _check_latent(f, n, name="f"):
    f = np.asarray(f, dtype=float)
    if f.shape != (n,):
        raise ValidationError(f"{name} must have shape ({n},), got {f.shape}")
    return f


def _gauss_log_density(t, f, beta):
    return -0.5 * _LOG_2PI - np.log(beta) - 0.5 * ((t - f) / beta) ** 2


def data_terms_single(f, data, theta):
    """Unnormalised data part of the single-risk objective.

    Returns ``(value, grad, w)`` where ``value = -sum_i log P_i``, ``grad``
    its gradient and ``w`` the diagonal curvature; the caller adds the prior.
    """
    if data.has_intervals:
        raise WrongLikelihoodError("nll_single cannot handle interval records")
    if int(data.event.max(initial=0)) > 1:
        raise WrongLikelihoodError("nll_single expects a single risk (labels 0/1)")
    n = data.n
    f = _check_latent(f, n)
    beta = float(theta.beta)
    t, _, _ = data.latent_times(theta.transform)
    ev = data.is_exact_event
    cen = data.is_censored

    h_cen = (t[cen] - f[cen]) / (beta * np.sqrt(2.0))
    value = -np.sum(_gauss_log_density(t[ev], f[ev], beta))
    value -= np.sum(_log_half_erfc(h_cen))

    grad = np.zeros(n)
    grad[ev] = -(t[ev] - f[ev]) / beta**2
    grad[cen] = -_dlog_survival_df(h_cen, beta)

    w = np.zeros(n)
    w[ev] = 1.0 / beta**2
    w[cen] = _w_censored(h_cen, beta)
    return float(value), grad, w


def data_terms_interval(f, data, theta):
    """Unnormalised data part with interval and right censoring, single risk."""
    if data.is_exact_event.any():
        raise WrongLikelihoodError("nll_interval expects interval and censored records only")
    n = data.n
    f = _check_latent(f, n)
    beta = float(theta.beta)
    t, tl, tu = data.latent_times(theta.transform)
    iv = data.is_interval
    cen = data.is_censored

    log_psi, dlog_iv, w_iv = _interval_terms_gauss(tl[iv], tu[iv], f[iv], beta)
    h_cen = (t[cen] - f[cen]) / (beta * np.sqrt(2.0))
    value = -np.sum(log_psi) - np.sum(_log_half_erfc(h_cen))

    grad = np.zeros(n)
    grad[iv] = -dlog_iv
    grad[cen] = -_dlog_survival_df(h_cen, beta)

    w = np.zeros(n)
    w[iv] = w_iv
    w[cen] = _w_censored(h_cen, beta)
    return float(value), grad, w


def data_terms_competing(f, data, theta):
    """Unnormalised data part over the stacked two-risk latent vector."""
    if data.has_intervals:
        raise WrongLikelihoodError("competing-risks likelihood cannot handle intervals")
    if int(data.event.max(initial=0)) > 2:
        raise ValidationError("competing-risks likelihood supports risk labels 0, 1, 2 only")
    n = data.n
    f = _check_latent(f, 2 * n)
    beta = float(theta.beta)
    t, _, _ = data.latent_times(theta.transform)

    value = 0.0
    grad = np.zeros(2 * n)
    w = np.zeros(2 * n)
    for r in (1, 2):
        sl = slice((r - 1) * n, r * n)
        fr = f[sl]
        own = data.event == r
        other = ~own
        h_other = (t[other] - fr[other]) / (beta * np.sqrt(2.0))
        value -= np.sum(_gauss_log_density(t[own], fr[own], beta))
        value -= np.sum(_log_half_erfc(h_other))
        g = np.zeros(n)
        g[own] = -(t[own] - fr[own]) / beta**2
        g[other] = -_dlog_survival_df(h_other, beta)
        grad[sl] = g
        wr = np.zeros(n)
        wr[own] = 1.0 / beta**2
        wr[other] = _w_censored(h_other, beta)
        w[sl] = wr
    return float(value), grad, w


def data_terms_gp_hazard(f, data, theta):
    """Unnormalised data part of the log-hazard GP with Weibull base hazard."""
    nu = float(theta.nu)
    if not nu > 0.0:
        raise ValidationError(f"nu must be positive, got {nu!r}")
    if data.has_intervals:
        raise WrongLikelihoodError("use nll_gp_hazard_interval for interval records")
    if int(data.event.max(initial=0)) > 1:
        raise WrongLikelihoodError("hazard-rate likelihood expects a single risk")
    n = data.n
    f = _check_latent(f, n)
    tau = data.time
    ev = data.is_exact_event

    with np.errstate(over="ignore"):
        cum = tau**nu * np.exp(f)
    log_lam0 = np.log(nu) + (nu - 1.0) * np.log(tau[ev])
    value = -np.sum(log_lam0 + f[ev]) + np.sum(cum)
    grad = cum - ev.astype(float)
    return float(value), grad, cum.copy()


def data_terms_gp_hazard_interval(f, data, theta):
    """Unnormalised data part of the hazard-rate GP with interval censoring."""
    nu = float(theta.nu)
    if not nu > 0.0:
        raise ValidationError(f"nu must be positive, got {nu!r}")
    if data.is_exact_event.any():
        raise WrongLikelihoodError(
            "interval hazard-rate likelihood expects interval and censored records only"
        )
    n = data.n
    f = _check_latent(f, n)
    iv = data.is_interval
    cen = data.is_censored

    with np.errstate(over="ignore"):
        x1 = data.t_lower[iv] ** nu * np.exp(f[iv])
        x2 = data.t_upper[iv] ** nu * np.exp(f[iv])
        x_cen = data.time[cen] ** nu * np.exp(f[cen])

    log_psi = stable_log_diff_exp(x1, x2)
    delta = x2 - x1
    denom = -np.expm1(-delta)  # 1 - exp(-(x2-x1))
    decay = np.exp(-delta)
    # d/df log psi = (-x1 + x2 exp(-delta)) / denom; the direct numerator
    # cancels for narrow intervals, the rearranged one for wide intervals
    wide = delta > _LOG_DIFF_CUTOFF
    with np.errstate(invalid="ignore", over="ignore"):
        dlog_iv = np.where(wide, (-x1 + x2 * decay) / denom, delta / denom - x2)
        t_direct = (x1 * x1 - x1 + (x2 - x2 * x2) * decay) / denom
        t_near = (x2 * x2 - x2) + (delta * (1.0 - 2.0 * x2) + delta * delta) / denom
    t_term = np.where(wide, t_direct, t_near)
    w_iv = dlog_iv * dlog_iv - t_term

    value = -np.sum(log_psi) + np.sum(x_cen)
    grad = np.zeros(n)
    grad[iv] = -dlog_iv
    grad[cen] = x_cen

    w = np.zeros(n)
    w[iv] = w_iv
    w[cen] = x_cen
    return float(value), grad, w


def _with_prior(data_fn, constant):
    """Wrap a data-terms function into the full per-subject-averaged NLL."""

    def nll(f, data, theta, gram) -> NllReport:
        n = data.n
        dval, dgrad, w = data_fn(f, data, theta)
        mean = 0.0 if data_fn in (data_terms_gp_hazard, data_terms_gp_hazard_interval) else theta.eta
        resid = np.asarray(f, dtype=float) - mean
        alpha = gram.solve(resid)
        value = (dval + 0.5 * resid @ alpha + 0.5 * gram.logdet()) / n + constant
        grad = (dgrad + alpha) / n
        return NllReport(value=float(value), grad=grad, w_diag=w)

    return nll


def nll_single(f, data, theta, gram) -> NllReport:
    """Per-subject-averaged negative log posterior, single risk, right censoring.

    ``theta`` must expose ``eta``, ``beta`` and ``transform``.  Exact events
    contribute the Gaussian log density at the transformed time, censored
    subjects the Gaussian log survival; the latent prior adds the quadratic
    form and half log determinant of the Gram matrix, each divided by N.
    """
    return _with_prior(data_terms_single, 0.0)(f, data, theta, gram)


def nll_interval(f, data, theta, gram) -> NllReport:
    """Single-risk negative log posterior with interval and right censoring."""
    return _with_prior(data_terms_interval, 0.5 * _LOG_2PI)(f, data, theta, gram)


def nll_competing(f, data, theta, gram) -> NllReport:
    """Two-risk negative log posterior over the stacked latent vector [f1; f2].

    Each subject contributes its event density to the risk that occurred and
    a survival factor to every other risk; censored subjects contribute
    survival factors to both.  The curvature matrix stays diagonal because
    cross-risk second derivatives of the data term vanish.
    """
    return _with_prior(data_terms_competing, _LOG_2PI)(f, data, theta, gram)


def nll_gp_hazard(f, data, theta, gram) -> NllReport:
    """Negative log posterior of the log-hazard GP with Weibull base hazard.

    Works on the raw time axis with base hazard ``nu * tau^(nu-1)`` and a
    zero-mean latent prior.  Every subject contributes the cumulative hazard
    ``tau^nu * exp(f)``; events additionally contribute the log hazard.
    """
    return _with_prior(data_terms_gp_hazard, 0.5 * _LOG_2PI)(f, data, theta, gram)


def nll_gp_hazard_interval(f, data, theta, gram) -> NllReport:
    """Hazard-rate GP likelihood with interval and right censoring."""
    return _with_prior(data_terms_gp_hazard_interval, 0.5 * _LOG_2PI)(f, data, theta, gram)


def select_nll(kind: str, data):
    """Pick the likelihood matching a model kind and the dataset record types."""
    kind = str(kind)
    if kind == "gp-aft":
        return nll_interval if data.has_intervals else nll_single
    if kind == "gp-competing":
        if data.has_intervals:
            raise WrongLikelihoodError("interval records are not supported with competing risks")
        return nll_competing
    if kind == "gp-hazard":
        return nll_gp_hazard_interval if data.has_intervals else nll_gp_hazard
    raise ValidationError(f"unknown model kind {kind!r}")


def select_data_terms(kind: str, data):
    """Data-terms companion of :func:`select_nll` for whitened optimisers."""
    kind = str(kind)
    if kind == "gp-aft":
        return data_terms_interval if data.has_intervals else data_terms_single
    if kind == "gp-competing":
        if data.has_intervals:
            raise WrongLikelihoodError("interval records are not supported with competing risks")
        return data_terms_competing
    if kind == "gp-hazard":
        return data_terms_gp_hazard_interval if data.has_intervals else data_terms_gp_hazard
    raise ValidationError(f"unknown model kind {kind!r}")
