"""Monotone map between the positive time axis and the latent regression axis.

Raw event times ``tau > 0`` are mapped to latent values
``t = log(exp(tau/gamma) - 1)``, which is close to ``tau/gamma`` whenever
``tau`` is a few multiples of ``gamma`` and smoothly squashes negative latent
values back into ``(0, inf)`` on inversion.  All routines use overflow-safe
reformulations; the literal expressions overflow in double precision once
``tau/gamma`` exceeds roughly 700.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "TransformConfig",
    "to_latent",
    "from_latent",
    "log_jacobian",
    "default_transform",
]


@dataclass(frozen=True)
class TransformConfig:
    """Scale parameter of the time transform.

    ``gamma`` must be positive and, for the transform to behave as an
    effectively linear map on the data it is fitted to, smaller than the
    smallest observed event/censoring time.  The second condition depends on
    the dataset and is checked by the fitting front ends, not here.
    """

    gamma: float = 1.0

    def __post_init__(self):
        g = float(self.gamma)
        if not np.isfinite(g) or g <= 0.0:
            raise ValidationError(f"gamma must be a positive finite real, got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)


def _check_positive_time(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(~(tau > 0.0)):
        raise ValidationError("times must be strictly positive")
    return tau


def to_latent(tau, cfg: TransformConfig):
    """Map positive times to the latent axis, ``t = log(exp(tau/gamma) - 1)``.

    Evaluated as ``z + log(1 - exp(-z))`` with ``z = tau/gamma`` so large
    arguments reduce to ``z`` instead of overflowing.  Scalar in, scalar out.
    """
    tau = _check_positive_time(tau)
    z = tau / cfg.gamma
    with np.errstate(divide="ignore"):
        out = z + np.log(-np.expm1(-z))
    return out if out.ndim else float(out)


def from_latent(t, cfg: TransformConfig):
    """Inverse transform, ``tau = gamma * log(1 + exp(t)) > 0`` for any real t."""
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)):
        raise ValidationError("latent times must be finite")
    out = cfg.gamma * (np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t))))
    return out if out.ndim else float(out)


def log_jacobian(tau, cfg: TransformConfig):
    """``log(dt/dtau)`` of the forward transform at a positive time.

    Equal to ``tau/gamma - log(gamma) - log(exp(tau/gamma) - 1)``; diverges to
    +inf as ``tau -> 0`` and tends to ``-log(gamma)`` in the linear regime.
    """
    tau = _check_positive_time(tau)
    z = tau / cfg.gamma
    with np.errstate(divide="ignore"):
        out = -np.log(cfg.gamma) - np.log(-np.expm1(-z))
    return out if out.ndim else float(out)


def default_transform(observed_times, fraction: float = 0.5) -> TransformConfig:
    """Transform with ``gamma = fraction * min(observed_times)``.

    Any positive fraction below one keeps gamma under the smallest observed
    time, which is all the model requires of it.
    """
    times = _check_positive_time(observed_times)
    if times.size == 0:
        raise ValidationError("need at least one observed time to choose gamma")
    if not 0.0 < fraction < 1.0:
        raise ValidationError("fraction must lie in (0, 1)")
    return TransformConfig(gamma=fraction * float(np.min(times)))
