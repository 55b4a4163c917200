"""Covariance functions and Gram-matrix assembly.

Two kernel families are provided:

* ``SingleKernelParams`` — squared-exponential with per-covariate (ARD)
  lengthscales.  Note the amplitude ``sigma`` is the output *variance*, i.e.
  ``k(x, x) = sigma``.
* ``MultiKernelParams`` — two-output convolution covariance built from a
  unique white-noise convolution per output (amplitude ``sigma``) plus a
  shared one (amplitude ``omega``) that carries the dependence between
  outputs, with an optional translation ``mu`` of one output relative to the
  other in covariate space.  Lengthscales are common to all components.

``build_gram`` assembles the (possibly 2N x 2N block) covariance matrix and
its Cholesky factor, escalating a diagonal jitter until factorisation
succeeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import IllConditionedKernelError, ValidationError

__all__ = [
    "SingleKernelParams",
    "MultiKernelParams",
    "GramMatrix",
    "se_ard",
    "multi_cov",
    "build_gram",
    "cross_vector",
    "prior_variance",
]

#: jitter ladder: start, multiplier and cap, all relative to mean(diag(K))
_JITTER_START = 1e-10
_JITTER_STEP = 10.0
_JITTER_MAX = 1e-4


def _as_lengthscales(value, name="lengthscales"):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1 or arr.size == 0 or np.any(~(arr > 0.0)) or np.any(~np.isfinite(arr)):
        raise ValidationError(f"{name} must be a vector of positive reals, got {value!r}")
    return arr


@dataclass
class SingleKernelParams:
    """Squared-exponential ARD kernel: ``k(xi,xj) = sigma*exp(-0.5*sum(((xi-xj)/l)^2))``."""

    sigma: float
    lengthscales: np.ndarray

    def __post_init__(self):
        self.sigma = float(self.sigma)
        if not np.isfinite(self.sigma) or self.sigma <= 0.0:
            raise ValidationError(f"sigma must be positive, got {self.sigma!r}")
        self.lengthscales = _as_lengthscales(self.lengthscales)

    @property
    def dim(self) -> int:
        return self.lengthscales.size


@dataclass
class MultiKernelParams:
    """Two-output convolution kernel with shared and unique components.

    ``sigma`` scales the component unique to each output, ``omega`` the
    component shared between outputs, ``mu`` translates output 2 relative to
    output 1 along every covariate axis, and the (common) lengthscales set the
    covariate-space correlation range.  ``omega = 0`` makes the outputs
    independent.
    """

    sigma: float
    omega: float
    lengthscales: np.ndarray
    mu: float = 0.0

    def __post_init__(self):
        self.sigma = float(self.sigma)
        self.omega = float(self.omega)
        self.mu = float(self.mu)
        if not np.isfinite(self.sigma) or self.sigma < 0.0:
            raise ValidationError(f"sigma must be nonnegative, got {self.sigma!r}")
        if not np.isfinite(self.omega) or self.omega < 0.0:
            raise ValidationError(f"omega must be nonnegative, got {self.omega!r}")
        if not np.isfinite(self.mu):
            raise ValidationError(f"mu must be finite, got {self.mu!r}")
        self.lengthscales = _as_lengthscales(self.lengthscales)

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    def amplitude(self) -> float:
        """Common prefactor pi^(d/2) * prod(l) of every covariance block."""
        d = self.dim
        return float(np.pi ** (d / 2.0) * np.prod(self.lengthscales))


def se_ard(xi, xj, params: SingleKernelParams) -> float:
    """Squared-exponential covariance between two covariate vectors."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xj = np.atleast_1d(np.asarray(xj, dtype=float))
    if xi.shape != xj.shape or xi.size != params.dim:
        raise ValidationError(
            f"dimension mismatch: xi {xi.shape}, xj {xj.shape}, kernel dim {params.dim}"
        )
    s = np.sum(((xi - xj) / params.lengthscales) ** 2, axis=-1)
    return float(params.sigma * np.exp(-0.5 * s))


def _se_matrix(xa, xb, params: SingleKernelParams):
    diff = (xa[:, None, :] - xb[None, :, :]) / params.lengthscales
    return params.sigma * np.exp(-0.5 * np.sum(diff**2, axis=-1))


def multi_cov(xi, xj, r: int, q: int, params: MultiKernelParams) -> float:
    """Covariance ``<f_r(xi), f_q(xj)>`` of the two-output convolution kernel.

    Outputs are indexed 1 and 2.  Same-output covariance carries both the
    unique and shared amplitudes; cross-output covariance carries only the
    shared one, with the displacement shifted by +/- ``mu``.
    """
    if r not in (1, 2) or q not in (1, 2):
        raise ValidationError(f"risk indices must be 1 or 2, got ({r}, {q})")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xj = np.atleast_1d(np.asarray(xj, dtype=float))
    if xi.shape != xj.shape or xi.size != params.dim:
        raise ValidationError(
            f"dimension mismatch: xi {xi.shape}, xj {xj.shape}, kernel dim {params.dim}"
        )
    amp = params.amplitude()
    d = xi - xj
    if r == q:
        s = np.sum((d / params.lengthscales) ** 2, axis=-1)
        return float(amp * (params.sigma**2 + params.omega**2) * np.exp(-0.25 * s))
    shift = -params.mu if (r, q) == (1, 2) else params.mu
    s = np.sum(((d + shift) / params.lengthscales) ** 2, axis=-1)
    return float(amp * params.omega**2 * np.exp(-0.25 * s))


def _multi_block(xa, xb, params: MultiKernelParams, r: int, q: int):
    """Vectorised block [<f_r(xa_i), f_q(xb_j)>]_ij."""
    amp = params.amplitude()
    diff = xa[:, None, :] - xb[None, :, :]
    if r == q:
        s = np.sum((diff / params.lengthscales) ** 2, axis=-1)
        return amp * (params.sigma**2 + params.omega**2) * np.exp(-0.25 * s)
    shift = -params.mu if (r, q) == (1, 2) else params.mu
    s = np.sum(((diff + shift) / params.lengthscales) ** 2, axis=-1)
    return amp * params.omega**2 * np.exp(-0.25 * s)


@dataclass
class GramMatrix:
    """Covariance matrix plus the Cholesky factor of (values + jitter*I)."""

    values: np.ndarray
    jitter: float
    chol: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def solve(self, b):
        """Solve (K + jitter*I) x = b through the stored factor."""
        return cho_solve((self.chol, True), np.asarray(b, dtype=float))

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.chol))))

    def quad_form(self, v) -> float:
        """v' K^{-1} v via one triangular solve."""
        y = solve_triangular(self.chol, np.asarray(v, dtype=float), lower=True)
        return float(y @ y)

    def half_solve(self, b):
        """L^{-1} b, so that ||half_solve(v)||^2 = quad_form(v)."""
        return solve_triangular(self.chol, np.asarray(b, dtype=float), lower=True)


def _factorize_with_jitter(values, params):
    values = 0.5 * (values + values.T)  # kill rounding asymmetry
    scale = float(np.mean(np.diag(values)))
    if not np.isfinite(scale) or scale <= 0.0:
        raise IllConditionedKernelError(
            f"kernel produced a non-positive diagonal (scale={scale!r}) for {params!r}",
            params=params,
        )
    jitter = 0.0
    while True:
        try:
            chol = np.linalg.cholesky(values + jitter * np.eye(values.shape[0]))
            return GramMatrix(values=values, jitter=jitter, chol=chol)
        except np.linalg.LinAlgError:
            jitter = _JITTER_START * scale if jitter == 0.0 else jitter * _JITTER_STEP
            if jitter > _JITTER_MAX * scale:
                raise IllConditionedKernelError(
                    f"Cholesky failed at maximum jitter {jitter:.3e} for {params!r}",
                    params=params,
                ) from None


def _check_covariates(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValidationError(f"covariates must be an (N, d) matrix with N >= 1, got shape {x.shape}")
    if np.any(~np.isfinite(x)):
        raise ValidationError("covariates contain non-finite values")
    return x


def build_gram(x, params) -> GramMatrix:
    """Assemble the training covariance matrix for either kernel family.

    For ``SingleKernelParams`` this is the N x N squared-exponential matrix;
    for ``MultiKernelParams`` the 2N x 2N block matrix
    ``[[K11, K12], [K21, K22]]`` over the stacked outputs.  A diagonal jitter
    is escalated from 1e-10 to at most 1e-4 times the mean diagonal until the
    Cholesky factorisation succeeds.
    """
    x = _check_covariates(x)
    if isinstance(params, SingleKernelParams):
        if x.shape[1] != params.dim:
            raise ValidationError(
                f"covariate dimension {x.shape[1]} does not match kernel dim {params.dim}"
            )
        return _factorize_with_jitter(_se_matrix(x, x, params), params)
    if isinstance(params, MultiKernelParams):
        if x.shape[1] != params.dim:
            raise ValidationError(
                f"covariate dimension {x.shape[1]} does not match kernel dim {params.dim}"
            )
        k11 = _multi_block(x, x, params, 1, 1)
        k22 = _multi_block(x, x, params, 2, 2)
        k12 = _multi_block(x, x, params, 1, 2)
        k21 = _multi_block(x, x, params, 2, 1)
        values = np.block([[k11, k12], [k21, k22]])
        return _factorize_with_jitter(values, params)
    raise ValidationError(f"unknown kernel parameter type {type(params).__name__}")


def cross_vector(x_star, x, params, risk: int | None = None):
    """Covariances between a test input and the training set.

    Returns an (N,) vector for the single kernel and the stacked (2N,) vector
    ``[<f_r(x*), f_1(x_i)>, <f_r(x*), f_2(x_i)>]`` for the multi kernel, where
    ``risk`` selects r.
    """
    x = _check_covariates(x)
    xs = np.atleast_1d(np.asarray(x_star, dtype=float))[None, :]
    if xs.shape[1] != x.shape[1]:
        raise ValidationError(f"test input dim {xs.shape[1]} != training dim {x.shape[1]}")
    if isinstance(params, SingleKernelParams):
        return _se_matrix(xs, x, params)[0]
    if isinstance(params, MultiKernelParams):
        if risk not in (1, 2):
            raise ValidationError("risk index (1 or 2) required for the multi-output kernel")
        return np.concatenate(
            [_multi_block(xs, x, params, risk, 1)[0], _multi_block(xs, x, params, risk, 2)[0]]
        )
    raise ValidationError(f"unknown kernel parameter type {type(params).__name__}")


def prior_variance(params) -> float:
    """k(x*, x*) of either kernel family (independent of x* by stationarity)."""
    if isinstance(params, SingleKernelParams):
        return params.sigma
    if isinstance(params, MultiKernelParams):
        return params.amplitude() * (params.sigma**2 + params.omega**2)
    raise ValidationError(f"unknown kernel parameter type {type(params).__name__}")
