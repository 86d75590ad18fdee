"""Maximum Lyapunov exponent estimation from a scalar signal.

Pipeline: delay-coordinate reconstruction of the state space, nearest
neighbor tracking of trajectory separation (Rosenstein's method), then
least-squares slopes of the mean log-divergence curve over a short and a
long window.

The estimate is affine-invariant: rescaling or offsetting the input signal
scales all neighbor distances uniformly, which only shifts the log curve
and leaves its slopes unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    InvalidSpecError,
    InvalidWindowError,
)
from .signals import TimeSeries

# Distances below this are clamped before the log; exactly duplicated
# cycles would otherwise produce -inf.
DISTANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class EmbeddingSpec:
    delay_samples: int = 1
    dimension: int = 2

    def __post_init__(self):
        if int(self.delay_samples) != self.delay_samples or self.delay_samples < 1:
            raise InvalidSpecError(f"delay must be an integer >= 1, got {self.delay_samples}")
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise InvalidSpecError(f"embedding dimension must be >= 2, got {self.dimension}")


@dataclass(frozen=True)
class DivergenceCurve:
    mean_log_divergence: TimeSeries  # ln of state-space distance vs horizon (s)
    valid_pair_count: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.valid_pair_count, dtype=int)
        if counts.shape[0] != self.mean_log_divergence.n_samples:
            raise InvalidSpecError("pair counts and curve lengths differ")
        if np.any(counts < 0):
            raise InvalidSpecError("pair counts must be nonnegative")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "valid_pair_count", counts)


@dataclass(frozen=True)
class LyapunovResult:
    lambda_short: float  # 1/s
    lambda_long: float   # 1/s
    fit_windows: Tuple[Tuple[float, float], Tuple[float, float]]
    fit_residuals: Tuple[float, float]

    def __post_init__(self):
        (s0, s1), (l0, l1) = self.fit_windows
        if not (s0 < s1 and l0 < l1):
            raise InvalidWindowError("fit windows must have positive extent")
        if s1 > l0:
            raise InvalidWindowError("short window must precede the long window")


def delay_embed(series: TimeSeries, spec: EmbeddingSpec) -> np.ndarray:
    """Trajectory matrix of shape (N - (m-1)*tau, m);
    row i = (x_i, x_{i+tau}, ..., x_{i+(m-1)tau})."""
    if series.n_channels != 1:
        raise InvalidSpecError("delay embedding expects a scalar series")
    x = series.values()
    m, tau = spec.dimension, spec.delay_samples
    n_vec = len(x) - (m - 1) * tau
    if n_vec < 2:
        raise InsufficientDataError(
            f"series of length {len(x)} too short for m={m}, tau={tau}")
    idx = np.arange(n_vec)[:, None] + np.arange(m)[None, :] * tau
    return x[idx]


def mean_period_s(series: TimeSeries) -> float:
    """Reciprocal of the power-weighted mean frequency, used as the
    temporal exclusion window for neighbor searches."""
    x = series.values() - np.mean(series.values())
    spec = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(x), d=1.0 / series.sample_rate_hz)
    power = spec[1:]
    if np.sum(power) <= 0:
        raise DegenerateDataError("signal has no spectral power (constant input)")
    fbar = float(np.sum(freqs[1:] * power) / np.sum(power))
    if fbar <= 0:
        raise DegenerateDataError("power-weighted mean frequency is zero")
    return 1.0 / fbar


def rosenstein_divergence(trajectory: np.ndarray, sample_rate_hz: float,
                          mean_period: float, max_horizon_s: float) -> DivergenceCurve:
    """Mean log separation of nearest-neighbor trajectory pairs.

    For each state vector the nearest Euclidean neighbor is chosen among
    vectors more than ``mean_period`` away in time. The curve value at
    horizon step k is the mean over pairs of ln(distance after k steps);
    pairs that run off the end of the trajectory drop out of later steps.
    """
    traj = np.asarray(trajectory, dtype=float)
    n = traj.shape[0]
    exclusion = max(1, int(round(mean_period * sample_rate_hz)))
    if n <= exclusion + 1:
        raise DegenerateDataError(
            f"trajectory of {n} vectors has no pairs outside the "
            f"{exclusion}-sample exclusion window")

    # Blocked nearest-neighbor search with the temporal exclusion band
    # masked out; keeps memory at O(block * n) instead of O(n^2).
    sq_norms = np.sum(traj ** 2, axis=1)
    neighbor = np.empty(n, dtype=int)
    best = np.empty(n)
    block = 256
    index = np.arange(n)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        d2 = (sq_norms[lo:hi, None] - 2.0 * traj[lo:hi] @ traj.T + sq_norms[None, :])
        mask = np.abs(index[lo:hi, None] - index[None, :]) <= exclusion
        d2[mask] = np.inf
        neighbor[lo:hi] = np.argmin(d2, axis=1)
        best[lo:hi] = d2[np.arange(hi - lo), neighbor[lo:hi]]
    finite = np.isfinite(best)
    if not np.any(finite):
        raise DegenerateDataError("no valid neighbor pairs")

    pairs_i = index[finite]
    pairs_j = neighbor[finite]
    max_steps = int(round(max_horizon_s * sample_rate_hz))
    mean_log = []
    counts = []
    for k in range(max_steps + 1):
        keep = (pairs_i + k < n) & (pairs_j + k < n)
        if not np.any(keep):
            break
        diff = traj[pairs_i[keep] + k] - traj[pairs_j[keep] + k]
        dist = np.maximum(np.linalg.norm(diff, axis=1), DISTANCE_FLOOR)
        mean_log.append(np.mean(np.log(dist)))
        counts.append(int(np.sum(keep)))
    curve = TimeSeries(np.asarray(mean_log), sample_rate_hz, 0.0,
                       channel_names=("mean_log_div",))
    return DivergenceCurve(curve, np.asarray(counts))


def _window_slope(curve: DivergenceCurve, window: Tuple[float, float]) -> Tuple[float, float]:
    t = curve.mean_log_divergence.times()
    y = curve.mean_log_divergence.values()
    t0, t1 = window
    eps = 0.5 / curve.mean_log_divergence.sample_rate_hz  # half-sample slack
    mask = (t >= t0 - eps) & (t <= t1 + eps)
    if t0 < t[0] - eps or t1 > t[-1] + eps or np.sum(mask) < 3:
        raise InvalidWindowError(
            f"fit window [{t0}, {t1}] s needs >= 3 curve points inside [{t[0]}, {t[-1]}] s")
    coeffs, residuals, *_ = np.polyfit(t[mask], y[mask], 1, full=True)
    resid = float(residuals[0]) if len(residuals) else 0.0
    return float(coeffs[0]), resid


def lyapunov_fit(curve: DivergenceCurve,
                 short_window: Tuple[float, float],
                 long_window: Tuple[float, float]) -> LyapunovResult:
    """Ordinary least-squares slopes of the divergence curve over the two
    windows, in 1/s."""
    lam_s, res_s = _window_slope(curve, short_window)
    lam_l, res_l = _window_slope(curve, long_window)
    return LyapunovResult(lam_s, lam_l, (tuple(short_window), tuple(long_window)),
                          (res_s, res_l))


@dataclass(frozen=True)
class LyapunovConfig:
    """End-to-end estimation settings. Delay defaults to 0.6 s at the
    native rate; windows are explicit choices, not published values."""

    delay_s: float = 0.6
    dimension: int = 2
    short_window: Tuple[float, float] = (0.0, 0.5)
    long_window: Tuple[float, float] = (1.0, 2.5)
    max_horizon_s: Optional[float] = None
    mean_period_s: Optional[float] = None

    def embedding(self, sample_rate_hz: float) -> EmbeddingSpec:
        delay = max(1, int(round(self.delay_s * sample_rate_hz)))
        return EmbeddingSpec(delay_samples=delay, dimension=self.dimension)


def lyapunov_from_series(series: TimeSeries, config: LyapunovConfig = LyapunovConfig()
                         ) -> Tuple[LyapunovResult, DivergenceCurve]:
    """Embed, measure divergence, and fit both exponents."""
    spec = config.embedding(series.sample_rate_hz)
    trajectory = delay_embed(series, spec)
    period = config.mean_period_s if config.mean_period_s is not None else mean_period_s(series)
    horizon = config.max_horizon_s if config.max_horizon_s is not None else config.long_window[1]
    curve = rosenstein_divergence(trajectory, series.sample_rate_hz, period, horizon)
    result = lyapunov_fit(curve, config.short_window, config.long_window)
    return result, curve
