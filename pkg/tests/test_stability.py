import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinekit.errors import DegenerateDataError, InsufficientDataError, InvalidSpecError, InvalidWindowError
from spinekit.signals import TimeSeries
from spinekit.stability import (
    DISTANCE_FLOOR,
    DivergenceCurve,
    EmbeddingSpec,
    LyapunovConfig,
    delay_embed,
    lyapunov_fit,
    lyapunov_from_series,
    mean_period_s,
    rosenstein_divergence,
)
from spinekit.synth import logistic_map, logistic_local_exponent, sine_wave

LOGISTIC_CONFIG = LyapunovConfig(delay_s=1.0, dimension=2, short_window=(0.0, 4.0),
                                 long_window=(6.0, 8.0), max_horizon_s=8.0)
# 0.927051 Hz at 60 Hz sampling: incommensurate, so neighbor revisits never
# collapse to exact duplicates within the fixture length.
PERIODIC_FREQ = 0.927051


def periodic_series(duration_s=60.0, scale=1.0, offset=0.0):
    x = sine_wave(PERIODIC_FREQ, 60.0, duration_s)
    return TimeSeries(scale * x + offset, 60.0)


def logistic_series(n=2000):
    return TimeSeries(logistic_map(n, x0=0.37), 1.0)


class TestDelayEmbed:
    def test_count_at_paper_delay(self):
        # 0.6 s delay at 60 Hz = 36 samples; 100 samples embed into 64 vectors
        ts = TimeSeries(np.sin(np.arange(100) * 0.3), 60.0)
        traj = delay_embed(ts, EmbeddingSpec(delay_samples=36, dimension=2))
        assert traj.shape == (64, 2)

    def test_dimension_one_rejected(self):
        with pytest.raises(InvalidSpecError):
            EmbeddingSpec(delay_samples=1, dimension=1)

    def test_constant_series_identical_vectors(self):
        ts = TimeSeries(np.full(50, 2.5), 10.0)
        traj = delay_embed(ts, EmbeddingSpec(delay_samples=3, dimension=3))
        assert np.all(traj == 2.5)

    @given(n=st.integers(10, 300), m=st.integers(2, 5), tau=st.integers(1, 20))
    @settings(max_examples=60, deadline=None)
    def test_count_formula(self, n, m, tau):
        if n - (m - 1) * tau < 2:
            return
        ts = TimeSeries(np.arange(n, dtype=float), 10.0)
        traj = delay_embed(ts, EmbeddingSpec(delay_samples=tau, dimension=m))
        assert traj.shape == (n - (m - 1) * tau, m)
        # row i is (x_i, x_{i+tau}, ..., x_{i+(m-1)tau})
        assert np.array_equal(traj[0], np.arange(m) * tau)

    def test_too_short_rejected(self):
        ts = TimeSeries(np.arange(10, dtype=float), 10.0)
        with pytest.raises(InsufficientDataError):
            delay_embed(ts, EmbeddingSpec(delay_samples=9, dimension=2))

    def test_vector_series_rejected(self):
        ts = TimeSeries(np.zeros((30, 2)), 10.0)
        with pytest.raises(InvalidSpecError):
            delay_embed(ts, EmbeddingSpec(delay_samples=1, dimension=2))


class TestRosensteinDivergence:
    def test_duplicated_cycles_hit_distance_floor(self):
        seg = sine_wave(1.0, 60.0, 2.0)
        dup = np.concatenate([seg, seg, seg])
        traj = delay_embed(TimeSeries(dup, 60.0), EmbeddingSpec(36, 2))
        curve = rosenstein_divergence(traj, 60.0, mean_period=1.0, max_horizon_s=1.0)
        vals = curve.mean_log_divergence.values()
        assert np.all(np.isfinite(vals))
        assert vals[0] == pytest.approx(np.log(DISTANCE_FLOOR))

    def test_periodic_curve_flat(self):
        ts = periodic_series()
        traj = delay_embed(ts, EmbeddingSpec(36, 2))
        curve = rosenstein_divergence(traj, 60.0, mean_period_s(ts), max_horizon_s=2.5)
        slope = np.polyfit(curve.mean_log_divergence.times(),
                           curve.mean_log_divergence.values(), 1)[0]
        assert abs(slope) < 0.02

    def test_logistic_positive_initial_slope(self):
        traj = delay_embed(logistic_series(), EmbeddingSpec(1, 2))
        curve = rosenstein_divergence(traj, 1.0, mean_period=4.0, max_horizon_s=4.0)
        y = curve.mean_log_divergence.values()
        assert y[1] > y[0]
        assert (y[4] - y[0]) / 4.0 > 0.3

    def test_pair_counts_never_increase(self):
        traj = delay_embed(logistic_series(500), EmbeddingSpec(1, 2))
        curve = rosenstein_divergence(traj, 1.0, mean_period=4.0, max_horizon_s=20.0)
        assert np.all(np.diff(curve.valid_pair_count) <= 0)
        assert len(curve.valid_pair_count) == curve.mean_log_divergence.n_samples

    def test_no_valid_pairs_rejected(self):
        traj = np.column_stack([np.arange(5.0), np.arange(5.0)])
        with pytest.raises(DegenerateDataError):
            rosenstein_divergence(traj, 1.0, mean_period=10.0, max_horizon_s=2.0)


class TestLyapunovFit:
    def make_curve(self, slope, n=40, rate=10.0, intercept=-5.0):
        t = np.arange(n) / rate
        ts = TimeSeries(intercept + slope * t, rate)
        return DivergenceCurve(ts, np.full(n, 100))

    def test_exact_line(self):
        curve = self.make_curve(0.5)
        res = lyapunov_fit(curve, (0.0, 1.0), (2.0, 3.5))
        assert res.lambda_short == pytest.approx(0.5, abs=1e-12)
        assert res.lambda_long == pytest.approx(0.5, abs=1e-12)

    def test_flat_curve(self):
        curve = self.make_curve(0.0)
        res = lyapunov_fit(curve, (0.0, 1.0), (2.0, 3.5))
        assert res.lambda_short == pytest.approx(0.0, abs=1e-12)

    def test_window_outside_domain(self):
        curve = self.make_curve(0.2, n=20, rate=10.0)  # domain [0, 1.9]
        with pytest.raises(InvalidWindowError):
            lyapunov_fit(curve, (0.0, 0.5), (1.5, 2.5))

    def test_windows_must_be_ordered(self):
        curve = self.make_curve(0.2)
        with pytest.raises(InvalidWindowError):
            lyapunov_fit(curve, (1.0, 2.0), (0.0, 0.5))

    def test_logistic_map_against_local_expansion_oracle(self):
        # Oracle first: mean log |f'| along the orbit, independent of the
        # neighbor-divergence path. For r=4 the invariant-measure value is ln 2.
        orbit = logistic_map(2000, x0=0.37)
        oracle = logistic_local_exponent(orbit)
        assert oracle == pytest.approx(np.log(2.0), rel=0.01)
        res, _ = lyapunov_from_series(TimeSeries(orbit, 1.0), LOGISTIC_CONFIG)
        assert res.lambda_short == pytest.approx(np.log(2.0), rel=0.15)
        assert res.lambda_short == pytest.approx(oracle, rel=0.15)


class TestLyapunovFromSeries:
    def test_periodic_short_exponent_near_zero(self):
        res, _ = lyapunov_from_series(periodic_series(), LyapunovConfig())
        assert abs(res.lambda_short) < 0.02
        assert abs(res.lambda_long) < 0.02

    def test_affine_invariance_periodic(self):
        base, _ = lyapunov_from_series(periodic_series(), LyapunovConfig())
        moved, _ = lyapunov_from_series(periodic_series(scale=2.5, offset=1.0),
                                        LyapunovConfig())
        assert moved.lambda_short == pytest.approx(base.lambda_short, abs=1e-6)
        assert moved.lambda_long == pytest.approx(base.lambda_long, abs=1e-6)

    def test_affine_invariance_logistic(self):
        orbit = logistic_map(2000, x0=0.37)
        base, _ = lyapunov_from_series(TimeSeries(orbit, 1.0), LOGISTIC_CONFIG)
        moved, _ = lyapunov_from_series(TimeSeries(-3.0 * orbit + 0.7, 1.0),
                                        LOGISTIC_CONFIG)
        assert moved.lambda_short == pytest.approx(base.lambda_short, abs=1e-6)

    def test_time_shift_changes_little(self):
        orbit = logistic_map(2000, x0=0.37)
        base, _ = lyapunov_from_series(TimeSeries(orbit, 1.0), LOGISTIC_CONFIG)
        shifted, _ = lyapunov_from_series(TimeSeries(orbit[20:], 1.0), LOGISTIC_CONFIG)
        assert abs(shifted.lambda_short - base.lambda_short) < 0.05 * abs(base.lambda_short)

    def test_divergence_curve_csv_columns(self):
        _, curve = lyapunov_from_series(periodic_series(duration_s=20.0), LyapunovConfig())
        assert curve.mean_log_divergence.channel_names == ("mean_log_div",)
        assert len(curve.valid_pair_count) == curve.mean_log_divergence.n_samples
