"""Survival dataset container.

Each of the N subjects carries a covariate vector and exactly one record:

* exact event at ``time`` with risk label ``event in 1..n_risks``,
* right censoring at ``time`` with ``event == 0``, or
* interval censoring in ``(t_lower, t_upper)`` with ``event == 1``.

Interval rows are marked by finite ``t_lower``/``t_upper`` and NaN ``time``;
all other rows carry NaN bounds.  Raw times are stored; likelihoods transform
them to the latent axis on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .timescale import TransformConfig, to_latent

__all__ = ["SurvivalDataset"]


@dataclass
class SurvivalDataset:
    x: np.ndarray
    event: np.ndarray
    time: np.ndarray
    t_lower: np.ndarray | None = None
    t_upper: np.ndarray | None = None
    n_risks: int = field(default=0)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        if self.x.ndim != 2 or self.x.shape[0] < 1:
            raise ValidationError(f"covariates must be (N, d), got shape {self.x.shape}")
        if np.any(~np.isfinite(self.x)):
            raise ValidationError("covariates contain NaN or infinite entries")
        n = self.x.shape[0]

        self.event = np.asarray(self.event, dtype=int)
        self.time = np.asarray(self.time, dtype=float)
        if self.t_lower is None:
            self.t_lower = np.full(n, np.nan)
        if self.t_upper is None:
            self.t_upper = np.full(n, np.nan)
        self.t_lower = np.asarray(self.t_lower, dtype=float)
        self.t_upper = np.asarray(self.t_upper, dtype=float)
        for name, arr in [
            ("event", self.event),
            ("time", self.time),
            ("t_lower", self.t_lower),
            ("t_upper", self.t_upper),
        ]:
            if arr.shape != (n,):
                raise ValidationError(f"{name} must have shape ({n},), got {arr.shape}")

        if np.any(self.event < 0):
            raise ValidationError("event labels must be nonnegative integers")
        if self.n_risks <= 0:
            self.n_risks = max(1, int(self.event.max(initial=0)))
        if np.any(self.event > self.n_risks):
            raise ValidationError(
                f"event label exceeds declared number of risks ({self.n_risks})"
            )

        interval = np.isfinite(self.t_lower) | np.isfinite(self.t_upper)
        if np.any(np.isfinite(self.t_lower) != np.isfinite(self.t_upper)):
            raise ValidationError("interval rows need both t_lower and t_upper")
        if np.any(interval & np.isfinite(self.time)):
            raise ValidationError("interval rows must not also carry an exact time")
        if np.any(~interval & ~np.isfinite(self.time)):
            raise ValidationError("non-interval rows must carry a finite time")
        if np.any(interval & (self.event != 1)):
            raise ValidationError("interval records are only supported for event label 1")
        if np.any(self.time[~interval] <= 0.0):
            raise ValidationError("times must be strictly positive")
        if np.any(self.t_lower[interval] <= 0.0):
            raise ValidationError("interval lower bounds must be strictly positive")
        if np.any(self.t_lower[interval] >= self.t_upper[interval]):
            raise ValidationError("interval bounds need t_lower < t_upper")
        self._interval = interval

    # -- basic queries ------------------------------------------------------

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def is_interval(self) -> np.ndarray:
        return self._interval

    @property
    def is_censored(self) -> np.ndarray:
        return (self.event == 0) & ~self._interval

    @property
    def is_exact_event(self) -> np.ndarray:
        return (self.event > 0) & ~self._interval

    @property
    def has_intervals(self) -> bool:
        return bool(self._interval.any())

    def observed_times(self) -> np.ndarray:
        """All finite positive times in the dataset (incl. interval bounds)."""
        parts = [self.time[~self._interval]]
        if self.has_intervals:
            parts += [self.t_lower[self._interval], self.t_upper[self._interval]]
        return np.concatenate(parts)

    # -- derived views ------------------------------------------------------

    def latent_times(self, cfg: TransformConfig):
        """(time, t_lower, t_upper) mapped to the latent axis; NaN passes through."""

        def conv(a):
            out = np.full_like(a, np.nan)
            m = np.isfinite(a)
            if m.any():
                out[m] = to_latent(a[m], cfg)
            return out

        return conv(self.time), conv(self.t_lower), conv(self.t_upper)

    def subset(self, idx) -> "SurvivalDataset":
        idx = np.asarray(idx)
        return SurvivalDataset(
            x=self.x[idx],
            event=self.event[idx],
            time=self.time[idx],
            t_lower=self.t_lower[idx],
            t_upper=self.t_upper[idx],
            n_risks=self.n_risks,
        )

    def relabel_for_risk(self, risk: int) -> "SurvivalDataset":
        """Single-risk view: keep risk ``risk`` as the event, censor the rest.

        Events of every other risk become right censorings at their observed
        time.  Interval records are not supported here.
        """
        if self.has_intervals:
            raise ValidationError("cannot relabel interval-censored data")
        if not 1 <= risk <= self.n_risks:
            raise ValidationError(f"risk must be in 1..{self.n_risks}, got {risk}")
        event = np.where(self.event == risk, 1, 0)
        return SurvivalDataset(x=self.x, event=event, time=self.time, n_risks=1)

    def with_values(self, **kwargs) -> "SurvivalDataset":
        return replace(self, **kwargs)
