import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinekit.errors import (
    DegenerateGeometryError,
    InvalidConfigError,
    InvalidInputError,
    MissingLandmarkError,
)
from spinekit.kinematics import (
    LELBOW,
    LHIP,
    LSHOULDER,
    LWRIST,
    RELBOW,
    RHIP,
    RSHOULDER,
    RWRIST,
    Landmark,
    LumbopelvicRhythm,
    PoseFrame,
    PoseSequence,
    asymmetry_angle,
    axis_vector,
    hip_vertical_displacement,
    metric_series,
    point_kinematics,
    read_pose_jsonl,
    sacral_rotation,
    shoulder_to_hand_distance,
    trunk_flexion,
    upper_arm_angle,
)
from spinekit.signals import FilterSpec
from spinekit.synth import bowing_sequence, skeleton_frame, static_sequence


def frame_from_points(points, time_s=0.0, confidence=1.0):
    marks = {name: Landmark(name, np.asarray(p, float), confidence)
             for name, p in points.items()}
    return PoseFrame(time_s, marks)


def torso_frame(mid_shoulder, mid_hip, mid_wrist=None, half_shoulder=0.2, half_hip=0.15):
    """Frame with shoulders/hips split laterally (y) around the given midpoints."""
    ey = np.array([0.0, 1.0, 0.0])
    ms, mh = np.asarray(mid_shoulder, float), np.asarray(mid_hip, float)
    pts = {
        LSHOULDER: ms + half_shoulder * ey, RSHOULDER: ms - half_shoulder * ey,
        LHIP: mh + half_hip * ey, RHIP: mh - half_hip * ey,
    }
    if mid_wrist is not None:
        mw = np.asarray(mid_wrist, float)
        pts[LWRIST] = mw + 0.1 * ey
        pts[RWRIST] = mw - 0.1 * ey
    return frame_from_points(pts)


class TestTrunkFlexion:
    def test_upright_is_zero(self):
        f = torso_frame([0, 0, 1.5], [0, 0, 1.0])
        assert trunk_flexion(f, "+z") == pytest.approx(0.0, abs=1e-9)

    def test_forty_five(self):
        f = torso_frame([0.5, 0, 1.5], [0, 0, 1.0])
        assert trunk_flexion(f, "+z") == pytest.approx(45.0, abs=1e-9)

    def test_horizontal_is_ninety(self):
        f = torso_frame([0.5, 0, 1.0], [0, 0, 1.0])
        assert trunk_flexion(f, "+z") == pytest.approx(90.0, abs=1e-9)

    def test_missing_landmark_named(self):
        f = frame_from_points({LSHOULDER: [0, 0.2, 1.5], RSHOULDER: [0, -0.2, 1.5],
                               LHIP: [0, 0.15, 1.0]})
        with pytest.raises(MissingLandmarkError) as exc:
            trunk_flexion(f, "+z")
        assert exc.value.context["landmark"] == RHIP

    def test_degenerate_geometry(self):
        f = torso_frame([0, 0, 1.0], [0, 0, 1.0])
        with pytest.raises(DegenerateGeometryError):
            trunk_flexion(f, "+z")

    @given(scale=st.floats(0.1, 50), shift=st.floats(-5, 5),
           theta=st.floats(0, 2 * np.pi))
    @settings(max_examples=50, deadline=None)
    def test_invariance_scale_shift_yaw(self, scale, shift, theta):
        base = skeleton_frame(0.0, flexion_deg=33.0)
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
        moved = frame_from_points({
            name: rot @ (lm.position * scale) + shift
            for name, lm in base.landmarks.items()})
        assert trunk_flexion(moved, "+z") == pytest.approx(
            trunk_flexion(base, "+z"), abs=1e-9)


class TestShoulderToHand:
    def test_wrists_at_shoulders(self):
        f = skeleton_frame(0.0, arm_angle_deg=180.0, upper_arm=0.0, forearm=0.0)
        assert shoulder_to_hand_distance(f, "+z") == pytest.approx(0.0, abs=1e-12)

    def test_unit_lever(self):
        f = torso_frame([0, 0, 1.5], [0, 0, 1.0], mid_wrist=[0.4, 0, 1.2])
        # shoulder width 0.4, horizontal offset 0.4
        assert shoulder_to_hand_distance(f, "+z") == pytest.approx(1.0, abs=1e-9)

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            pts = {name: rng.normal(size=3) for name in
                   (LSHOULDER, RSHOULDER, LWRIST, RWRIST)}
            f = frame_from_points(pts)
            ms = 0.5 * (pts[LSHOULDER] + pts[RSHOULDER])
            mw = 0.5 * (pts[LWRIST] + pts[RWRIST])
            d = mw - ms
            horiz = np.hypot(d[0], d[1])
            width = np.linalg.norm(pts[LSHOULDER] - pts[RSHOULDER])
            assert shoulder_to_hand_distance(f, "+z") == pytest.approx(
                horiz / width, rel=1e-12)

    def test_scale_invariant(self):
        f = skeleton_frame(0.0, flexion_deg=40.0, arm_angle_deg=120.0)
        scaled = frame_from_points({n: lm.position * 7.5 for n, lm in f.landmarks.items()})
        assert shoulder_to_hand_distance(scaled, "+z") == pytest.approx(
            shoulder_to_hand_distance(f, "+z"), abs=1e-9)

    def test_zero_width_rejected(self):
        f = frame_from_points({LSHOULDER: [0, 0, 1.5], RSHOULDER: [0, 0, 1.5],
                               LWRIST: [0.3, 0, 1.0], RWRIST: [0.3, 0, 1.0]})
        with pytest.raises(DegenerateGeometryError):
            shoulder_to_hand_distance(f, "+z")


class TestAsymmetryAngle:
    def base_points(self):
        return {
            LSHOULDER: [0.0, 0.2, 1.5], RSHOULDER: [0.0, -0.2, 1.5],
            LHIP: [0.0, 0.15, 1.0], RHIP: [0.0, -0.15, 1.0],
        }

    def with_hands(self, offset):
        pts = self.base_points()
        pts[LWRIST] = np.add(offset, [0.0, 0.05, 0.0])
        pts[RWRIST] = np.add(offset, [0.0, -0.05, 0.0])
        return frame_from_points(pts)

    def test_sagittal_hands_zero(self):
        f = self.with_hands([0.4, 0.0, 1.0])
        assert asymmetry_angle(f, "+z") == pytest.approx(0.0, abs=1e-9)

    def test_lateral_hands_ninety(self):
        f = self.with_hands([0.0, 0.5, 1.0])
        assert asymmetry_angle(f, "+z") == pytest.approx(90.0, abs=1e-9)

    def test_diagonal_hands_forty_five(self):
        f = self.with_hands([0.4, 0.4, 1.0])
        assert asymmetry_angle(f, "+z") == pytest.approx(45.0, abs=1e-9)

    def test_zero_hand_offset_rejected(self):
        f = self.with_hands([0.0, 0.0, 0.6])
        with pytest.raises(DegenerateGeometryError):
            asymmetry_angle(f, "+z")


class TestUpperArmAngle:
    def test_hanging_arm(self):
        f = skeleton_frame(0.0, arm_angle_deg=180.0)
        assert upper_arm_angle(f, "+z") == pytest.approx(180.0, abs=1e-9)

    def test_raised_arm(self):
        f = skeleton_frame(0.0, arm_angle_deg=0.0)
        assert upper_arm_angle(f, "+z") == pytest.approx(0.0, abs=1e-9)

    def test_horizontal_arm(self):
        f = skeleton_frame(0.0, arm_angle_deg=90.0)
        assert upper_arm_angle(f, "+z") == pytest.approx(90.0, abs=1e-9)

    def test_single_side_ok(self):
        full = skeleton_frame(0.0, arm_angle_deg=135.0)
        marks = {n: lm for n, lm in full.landmarks.items() if n not in (RELBOW,)}
        assert upper_arm_angle(PoseFrame(0.0, marks), "+z") == pytest.approx(135.0, abs=1e-9)


class TestHipDisplacement:
    def test_static_zero(self):
        seq = static_sequence(n_frames=30)
        out = hip_vertical_displacement(seq)
        assert np.allclose(out.values(), 0.0, atol=1e-12)
        assert out.n_samples == 30

    def test_linear_rise(self):
        rate, n = 30.0, 31
        frames = tuple(skeleton_frame(i / rate, hip_rise=0.5 * i / (n - 1))
                       for i in range(n))
        out = hip_vertical_displacement(PoseSequence(frames, rate))
        assert out.values()[0] == 0.0
        assert out.values()[-1] == pytest.approx(0.5, abs=1e-12)
        assert np.allclose(np.diff(out.values()), 0.5 / (n - 1), atol=1e-12)


class TestSacralRotation:
    def test_zero_flexion(self):
        assert sacral_rotation(0.0, LumbopelvicRhythm()) == 0.0

    def test_single_share(self):
        assert sacral_rotation(40.0, LumbopelvicRhythm(((0.0, 0.35),))) == pytest.approx(14.0)

    def test_interpolated_share(self):
        rhythm = LumbopelvicRhythm(((0.0, 0.2), (90.0, 0.6)))
        assert sacral_rotation(45.0, rhythm) == pytest.approx(18.0)

    def test_clamped_outside(self):
        rhythm = LumbopelvicRhythm(((10.0, 0.3), (50.0, 0.5)))
        assert sacral_rotation(100.0, rhythm) == pytest.approx(50.0)

    def test_monotone_with_equal_shares(self):
        rhythm = LumbopelvicRhythm(((0.0, 0.4),))
        vals = [sacral_rotation(a, rhythm) for a in np.linspace(0, 90, 20)]
        assert np.all(np.diff(vals) >= 0)

    def test_empty_knots_rejected(self):
        with pytest.raises(InvalidConfigError):
            LumbopelvicRhythm(())

    def test_bad_knot_order_rejected(self):
        with pytest.raises(InvalidConfigError):
            LumbopelvicRhythm(((10.0, 0.3), (10.0, 0.4)))


class TestMetricSeries:
    def test_constant_pose_constant_series(self):
        seq = static_sequence(n_frames=40, flexion_deg=25.0)
        out = metric_series(seq, "trunk_flexion")
        assert out.n_samples == 40
        assert np.allclose(out.values(), 25.0, atol=1e-9)

    def test_bowing_matches_generator(self):
        mean, amp, freq = 30.0, 20.0, 0.25
        seq = bowing_sequence(rate_hz=30.0, duration_s=12.0, mean_flexion_deg=mean,
                              amplitude_deg=amp, freq_hz=freq)
        out = metric_series(seq, "trunk_flexion")
        t = out.times()
        expect = mean + amp * np.sin(2 * np.pi * freq * t)
        assert np.allclose(out.values(), expect, atol=1e-9)

    def test_length_equals_frame_count(self):
        seq = bowing_sequence(duration_s=4.0)
        out = metric_series(seq, "shoulder_to_hand")
        assert out.n_samples == len(seq)

    def test_low_confidence_interior_interpolated(self):
        rate, n = 30.0, 21
        frames = list(skeleton_frame(i / rate, flexion_deg=10.0 + i) for i in range(n))
        frames[10] = skeleton_frame(10 / rate, flexion_deg=77.0, confidence=0.1)
        out = metric_series(PoseSequence(tuple(frames), rate), "trunk_flexion")
        assert out.n_samples == n
        assert out.values()[10] == pytest.approx(0.5 * (19.0 + 21.0), abs=1e-9)

    def test_low_confidence_boundary_trimmed(self):
        rate, n = 30.0, 20
        frames = list(skeleton_frame(i / rate, flexion_deg=10.0) for i in range(n))
        frames[0] = skeleton_frame(0.0, flexion_deg=10.0, confidence=0.0)
        out = metric_series(PoseSequence(tuple(frames), rate), "trunk_flexion")
        assert out.n_samples == n - 1
        assert out.start_time_s == pytest.approx(1 / rate)

    def test_unknown_metric_rejected(self):
        with pytest.raises(InvalidConfigError):
            metric_series(static_sequence(n_frames=5), "nope")


class TestPointKinematics:
    def test_stationary_zero(self):
        seq = static_sequence(rate_hz=60.0, n_frames=200)
        _, vel, acc = point_kinematics(seq, LHIP, FilterSpec(order=5, cutoff_hz=6.0))
        assert np.allclose(vel.data, 0.0, atol=1e-9)
        assert np.allclose(acc.data, 0.0, atol=1e-9)

    def test_free_fall_parabola(self):
        g, rate, n = 9.81, 60.0, 240
        frames = tuple(
            skeleton_frame(i / rate, hip_rise=-0.5 * g * (i / rate) ** 2 * 0.01)
            for i in range(n))
        # 0.01 keeps displacements small; acceleration target is g*0.01
        seq = PoseSequence(frames, rate)
        _, _, acc = point_kinematics(seq, LHIP, FilterSpec(order=5, cutoff_hz=8.0))
        interior = acc.data[60:-60, 2]
        assert np.allclose(interior, -g * 0.01, rtol=0.01)

    def test_sinusoid_amplitude(self):
        f, amp, rate = 0.5, 0.1, 60.0
        n = 600
        frames = tuple(
            skeleton_frame(i / rate, hip_rise=amp * np.sin(2 * np.pi * f * i / rate))
            for i in range(n))
        seq = PoseSequence(frames, rate)
        _, _, acc = point_kinematics(seq, LHIP, FilterSpec(order=5, cutoff_hz=5.0))
        interior = acc.data[150:-150, 2]
        assert np.max(np.abs(interior)) == pytest.approx((2 * np.pi * f) ** 2 * amp, rel=0.02)

    def test_missing_landmark_reports_frame(self):
        frames = [skeleton_frame(i / 30.0) for i in range(10)]
        marks = dict(frames[4].landmarks)
        del marks[LWRIST]
        frames[4] = PoseFrame(frames[4].time_s, marks)
        with pytest.raises(MissingLandmarkError) as exc:
            point_kinematics(PoseSequence(tuple(frames), 30.0), LWRIST,
                             FilterSpec(order=2, cutoff_hz=5.0))
        assert exc.value.context["frame_index"] == 4


class TestPoseIO:
    def write_jsonl(self, path, n=40, rate=30.0, names=None):
        names = names or {"left_shoulder": None}
        with open(path, "w") as fh:
            for i in range(n):
                f = skeleton_frame(i / rate, flexion_deg=15.0)
                rec = {"t": f.time_s, "landmarks": {
                    name: {"p": list(lm.position), "c": lm.confidence}
                    for name, lm in f.landmarks.items()}}
                fh.write(json.dumps(rec) + "\n")

    def test_roundtrip(self, tmp_path):
        p = tmp_path / "pose.jsonl"
        self.write_jsonl(p)
        seq = read_pose_jsonl(p)
        assert len(seq) == 40
        assert seq.nominal_rate_hz == pytest.approx(30.0)
        assert trunk_flexion(seq.frames[0], "+z") == pytest.approx(15.0, abs=1e-9)

    def test_coco_names_mapped(self, tmp_path):
        p = tmp_path / "coco.jsonl"
        with open(p, "w") as fh:
            for i in range(3):
                rec = {"t": i / 30.0, "landmarks": {
                    "left_shoulder": {"p": [0, 0.2, 1.5], "c": 0.9},
                    "right_shoulder": {"p": [0, -0.2, 1.5], "c": 0.9},
                    "left_hip": {"p": [0, 0.15, 1.0], "c": 0.9},
                    "right_hip": {"p": [0, -0.15, 1.0], "c": 0.9},
                }}
                fh.write(json.dumps(rec) + "\n")
        seq = read_pose_jsonl(p)
        assert trunk_flexion(seq.frames[0], "+z") == pytest.approx(0.0, abs=1e-9)

    def test_bad_record_reports_line(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"t": 0.0, "landmarks": {}}\n{"nope": 1}\n')
        with pytest.raises(InvalidInputError) as exc:
            read_pose_jsonl(p)
        assert exc.value.context["line"] == 2


class TestAxisVector:
    def test_axes(self):
        assert np.array_equal(axis_vector("+z"), [0, 0, 1])
        assert np.array_equal(axis_vector("-y"), [0, -1, 0])
        assert np.array_equal(axis_vector("x"), [1, 0, 0])

    def test_bad_axis(self):
        with pytest.raises(InvalidConfigError):
            axis_vector("w")
