"""Uniformly sampled time series plus the filtering/differentiation primitives
used throughout the toolkit.

Conventions
-----------
* A :class:`TimeSeries` always stores a 2-D float array of shape
  ``(n_samples, n_channels)``; scalar signals are a single channel.
* All operations are pure: they never mutate their inputs and return new
  series with the same sample rate unless stated otherwise.
* Low-pass filtering is zero-lag: one forward and one backward pass of a
  Butterworth filter (bilinear discretization), so the net phase shift is
  zero and the net magnitude response is the squared single-pass magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .errors import InsufficientDataError, InvalidInputError, InvalidSpecError


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled signal, scalar or vector valued.

    ``data`` has shape (n, d) with d >= 1. The sample at index i occurs at
    ``start_time_s + i / sample_rate_hz``.
    """

    data: np.ndarray
    sample_rate_hz: float
    start_time_s: float = 0.0
    channel_names: Optional[Tuple[str, ...]] = None
    units: Optional[str] = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise InvalidInputError("time series data must be 1-D or 2-D with at least one sample")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("time series contains non-finite samples")
        if not (self.sample_rate_hz > 0):
            raise InvalidSpecError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.channel_names is not None and len(self.channel_names) != arr.shape[1]:
            raise InvalidInputError("channel_names length does not match channel count")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return (self.n_samples - 1) / self.sample_rate_hz

    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(self.n_samples) / self.sample_rate_hz

    def values(self) -> np.ndarray:
        """1-D view for scalar series, 2-D for vector series."""
        return self.data[:, 0] if self.n_channels == 1 else self.data

    def with_data(self, data: np.ndarray, units: Optional[str] = None) -> "TimeSeries":
        return TimeSeries(data, self.sample_rate_hz, self.start_time_s,
                          self.channel_names, self.units if units is None else units)

    @staticmethod
    def from_times(times: Sequence[float], data: np.ndarray, rel_tol: float = 1e-6,
                   **kwargs) -> "TimeSeries":
        """Build from explicit timestamps, rejecting non-uniform spacing.

        Spacing must be uniform within ``rel_tol * dt``; all downstream
        formulas assume a fixed sample interval.
        """
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise InsufficientDataError("need at least two timestamps")
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise InvalidInputError("timestamps must be strictly increasing")
        dt0 = (t[-1] - t[0]) / (len(t) - 1)
        if np.max(np.abs(dt - dt0)) > rel_tol * dt0:
            raise InvalidInputError("timestamps are not uniformly spaced")
        return TimeSeries(data, 1.0 / dt0, start_time_s=float(t[0]), **kwargs)


@dataclass(frozen=True)
class FilterSpec:
    """Low-pass Butterworth parameters. Cutoff must stay below Nyquist at
    application time."""

    order: int = 5
    cutoff_hz: float = 1.5

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise InvalidSpecError(f"filter order must be an integer >= 1, got {self.order}")
        if not (self.cutoff_hz > 0):
            raise InvalidSpecError(f"cutoff must be positive, got {self.cutoff_hz}")


def butterworth_zero_lag(series: TimeSeries, spec: FilterSpec) -> TimeSeries:
    """Forward-backward Butterworth low-pass with no net phase shift.

    Each end is reflect-padded by 3 * (order + 1) samples before the two
    passes and trimmed afterwards, which suppresses start-up transients.
    Output has identical length, rate and start time.
    """
    nyquist = series.sample_rate_hz / 2.0
    if spec.cutoff_hz >= nyquist:
        raise InvalidSpecError(
            f"cutoff {spec.cutoff_hz} Hz is not below Nyquist {nyquist} Hz")
    pad = 3 * (spec.order + 1)
    if series.n_samples <= pad:
        raise InsufficientDataError(
            f"need more than {pad} samples for order {spec.order}, got {series.n_samples}")
    sos = butter(spec.order, spec.cutoff_hz, btype="low", fs=series.sample_rate_hz,
                 output="sos")
    out = sosfiltfilt(sos, series.data, axis=0, padtype="even", padlen=pad)
    return series.with_data(out)


# Second-order stencils. Interior: central. Boundaries: one-sided 3/4-point,
# also second-order, so output stays aligned with input timestamps.
def central_diff(series: TimeSeries, derivative_order: int = 1) -> TimeSeries:
    """Second-order-accurate finite differences, first or second derivative.

    Exact on polynomials of degree <= 2 for both orders. Units are the
    input units divided by seconds per derivative order.
    """
    if derivative_order not in (1, 2):
        raise InvalidSpecError(f"derivative_order must be 1 or 2, got {derivative_order}")
    if series.n_samples < 5:
        raise InsufficientDataError(
            f"need at least 5 samples, got {series.n_samples}")
    x = series.data
    h = 1.0 / series.sample_rate_hz
    out = np.empty_like(x)
    if derivative_order == 1:
        out[1:-1] = (x[2:] - x[:-2]) / (2.0 * h)
        out[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h)
        out[-1] = (3.0 * x[-1] - 4.0 * x[-2] + x[-3]) / (2.0 * h)
    else:
        out[1:-1] = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / (h * h)
        out[0] = (2.0 * x[0] - 5.0 * x[1] + 4.0 * x[2] - x[3]) / (h * h)
        out[-1] = (2.0 * x[-1] - 5.0 * x[-2] + 4.0 * x[-3] - x[-4]) / (h * h)
    return series.with_data(out)


def resample_linear(series: TimeSeries, new_rate_hz: float) -> TimeSeries:
    """Linear interpolation onto a uniform grid at ``new_rate_hz`` spanning
    the original time range."""
    if not (new_rate_hz > 0):
        raise InvalidSpecError(f"new rate must be positive, got {new_rate_hz}")
    if new_rate_hz == series.sample_rate_hz:
        return series
    t_old = series.times()
    n_new = int(np.floor(series.duration_s * new_rate_hz)) + 1
    t_new = series.start_time_s + np.arange(n_new) / new_rate_hz
    out = np.column_stack([np.interp(t_new, t_old, series.data[:, c])
                           for c in range(series.n_channels)])
    return TimeSeries(out, new_rate_hz, series.start_time_s,
                      series.channel_names, series.units)
