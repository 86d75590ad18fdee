"""Pose-keypoint schema and posture metrics computed from named 3D landmarks.

Angle conventions
-----------------
* Trunk flexion: angle between the up axis and the unit vector from mid-hip
  to mid-shoulder, in degrees. Upright is 0, horizontal trunk is 90.
* Upper-arm angle: angle between the up axis and shoulder-to-elbow, so an
  arm hanging straight down reads 180.
* Asymmetry angle: transverse-plane angle between the pelvis forward
  direction and the horizontal projection of mid-hip to mid-wrist. The
  pelvis forward direction is the horizontal normal of the hip line,
  disambiguated to agree with the shoulder line's forward normal. 0 means
  the hands are in the mid-sagittal plane ahead of the pelvis.

All angle metrics are invariant to rigid translation and uniform scaling of
the landmark cloud; mid-hand is approximated by the wrist midpoint because
pose skeletons lack a hand-center point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DegenerateGeometryError,
    InsufficientDataError,
    InvalidConfigError,
    InvalidInputError,
    MissingLandmarkError,
)
from .signals import FilterSpec, TimeSeries, butterworth_zero_lag, central_diff

# Canonical landmark names. Extra names pass through unused.
LSHOULDER = "LShoulder"
RSHOULDER = "RShoulder"
LHIP = "LHip"
RHIP = "RHip"
LWRIST = "LWrist"
RWRIST = "RWrist"
LELBOW = "LElbow"
RELBOW = "RElbow"
HEAD = "Head"

CANONICAL_LANDMARKS = (
    LSHOULDER, RSHOULDER, LHIP, RHIP, LWRIST, RWRIST, LELBOW, RELBOW, HEAD,
)

# COCO-17 style names mapped onto the canonical set; users can extend or
# replace this via a JSON mapping file.
DEFAULT_NAME_MAP: Dict[str, str] = {
    "left_shoulder": LSHOULDER,
    "right_shoulder": RSHOULDER,
    "left_hip": LHIP,
    "right_hip": RHIP,
    "left_wrist": LWRIST,
    "right_wrist": RWRIST,
    "left_elbow": LELBOW,
    "right_elbow": RELBOW,
    "nose": HEAD,
}

_AXES = {"x": 0, "y": 1, "z": 2}


def axis_vector(up_axis: str) -> np.ndarray:
    """Parse an axis tag like '+z' or '-y' into a unit vector."""
    tag = up_axis.strip().lower()
    sign = 1.0
    if tag[0] in "+-":
        sign = -1.0 if tag[0] == "-" else 1.0
        tag = tag[1:]
    if tag not in _AXES:
        raise InvalidConfigError(f"unknown up axis {up_axis!r}")
    v = np.zeros(3)
    v[_AXES[tag]] = sign
    return v


@dataclass(frozen=True)
class Landmark:
    name: str
    position: np.ndarray  # (3,), meters or normalized units
    confidence: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise InvalidInputError(f"landmark {self.name}: position must be a finite 3-vector")
        if not (0.0 <= self.confidence <= 1.0):
            raise InvalidInputError(f"landmark {self.name}: confidence {self.confidence} outside [0, 1]")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "position", p)


@dataclass(frozen=True)
class PoseFrame:
    time_s: float
    landmarks: Mapping[str, Landmark]

    def get(self, name: str) -> Landmark:
        lm = self.landmarks.get(name)
        if lm is None:
            raise MissingLandmarkError(f"landmark {name} missing from frame at t={self.time_s}",
                                       landmark=name)
        return lm

    def position(self, name: str) -> np.ndarray:
        return self.get(name).position

    def has(self, *names: str) -> bool:
        return all(n in self.landmarks for n in names)

    def midpoint(self, a: str, b: str) -> np.ndarray:
        return 0.5 * (self.position(a) + self.position(b))


@dataclass(frozen=True)
class PoseSequence:
    frames: Tuple[PoseFrame, ...]
    nominal_rate_hz: float
    up_axis: str = "+z"
    calibration_scale_m_per_unit: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if len(self.frames) == 0:
            raise InsufficientDataError("pose sequence has no frames")
        if not (self.nominal_rate_hz > 0):
            raise InvalidInputError("nominal rate must be positive")
        if self.calibration_scale_m_per_unit is not None and not (self.calibration_scale_m_per_unit > 0):
            raise InvalidInputError("calibration scale must be positive")
        t = np.array([f.time_s for f in self.frames])
        if len(t) > 1:
            dt = np.diff(t)
            if np.any(dt <= 0):
                raise InvalidInputError("frame times must be strictly increasing")
            dt0 = (t[-1] - t[0]) / (len(t) - 1)
            if np.max(np.abs(dt - dt0)) > 1e-6 * dt0:
                raise InvalidInputError("frame times are not uniformly spaced")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def scale(self) -> float:
        return self.calibration_scale_m_per_unit or 1.0

    def up(self) -> np.ndarray:
        return axis_vector(self.up_axis)


@dataclass(frozen=True)
class SubjectAnthropometry:
    sex: str  # "male" | "female"
    age_years: float
    height_m: float
    weight_kg: float
    waist_circumference_m: Optional[float] = None

    def __post_init__(self):
        if self.sex not in ("male", "female"):
            raise InvalidInputError(f"sex must be 'male' or 'female', got {self.sex!r}")
        for label, v in (("age", self.age_years), ("height", self.height_m),
                         ("weight", self.weight_kg)):
            if not (v > 0):
                raise InvalidInputError(f"{label} must be positive, got {v}")
        if self.waist_circumference_m is not None and not (self.waist_circumference_m > 0):
            raise InvalidInputError("waist circumference must be positive")

    @property
    def bmi(self) -> float:
        return self.weight_kg / self.height_m ** 2


@dataclass(frozen=True)
class LumbopelvicRhythm:
    """Pelvic share of total trunk flexion as a function of flexion angle.

    ``knots`` are (trunk_flexion_deg, pelvic_share) pairs with strictly
    increasing flexion; shares are interpolated linearly and clamped outside
    the knot range.
    """

    knots: Tuple[Tuple[float, float], ...] = ((0.0, 0.35),)

    def __post_init__(self):
        knots = tuple((float(a), float(s)) for a, s in self.knots)
        if len(knots) == 0:
            raise InvalidConfigError("lumbopelvic rhythm needs at least one knot")
        angles = [a for a, _ in knots]
        if any(b <= a for a, b in zip(angles, angles[1:])):
            raise InvalidConfigError("rhythm knots must have strictly increasing flexion")
        if any(not (0.0 <= s <= 1.0) for _, s in knots):
            raise InvalidConfigError("pelvic shares must lie in [0, 1]")
        object.__setattr__(self, "knots", knots)

    def pelvic_share(self, trunk_flexion_deg: float) -> float:
        angles = np.array([a for a, _ in self.knots])
        shares = np.array([s for _, s in self.knots])
        return float(np.interp(trunk_flexion_deg, angles, shares))


def _unit(v: np.ndarray, context: str) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise DegenerateGeometryError(f"degenerate geometry: {context}")
    return v / n


def _angle_deg(u: np.ndarray, v: np.ndarray) -> float:
    cosang = np.clip(np.dot(u, v), -1.0, 1.0)
    return float(np.degrees(np.arccos(cosang)))


def _horizontal(v: np.ndarray, up: np.ndarray) -> np.ndarray:
    return v - np.dot(v, up) * up


def trunk_flexion(frame: PoseFrame, up_axis: str = "+z") -> float:
    """Angle in degrees between the up axis and the mid-hip to mid-shoulder
    line. Range [0, 180]."""
    up = axis_vector(up_axis)
    mid_shoulder = frame.midpoint(LSHOULDER, RSHOULDER)
    mid_hip = frame.midpoint(LHIP, RHIP)
    trunk = _unit(mid_shoulder - mid_hip, "mid-shoulder coincides with mid-hip")
    return _angle_deg(up, trunk)


def shoulder_to_hand_distance(frame: PoseFrame, up_axis: str = "+z") -> float:
    """Horizontal mid-wrist to mid-shoulder distance divided by shoulder
    width. Dimensionless load lever arm, nonnegative."""
    up = axis_vector(up_axis)
    mid_shoulder = frame.midpoint(LSHOULDER, RSHOULDER)
    mid_wrist = frame.midpoint(LWRIST, RWRIST)
    width = np.linalg.norm(frame.position(LSHOULDER) - frame.position(RSHOULDER))
    if width < 1e-6:
        raise DegenerateGeometryError("shoulder width is zero")
    horiz = _horizontal(mid_wrist - mid_shoulder, up)
    return float(np.linalg.norm(horiz) / width)


def _forward_direction(frame: PoseFrame, left: str, right: str, up: np.ndarray,
                       context: str) -> np.ndarray:
    lateral = _horizontal(frame.position(left) - frame.position(right), up)
    return _unit(np.cross(lateral, up), context)


def asymmetry_angle(frame: PoseFrame, up_axis: str = "+z") -> float:
    """Transverse-plane angle between pelvis forward and the horizontal
    mid-hip to mid-wrist direction, degrees in [0, 180]."""
    up = axis_vector(up_axis)
    pelvis_fwd = _forward_direction(frame, LHIP, RHIP, up, "hip line has no horizontal extent")
    shoulder_fwd = _forward_direction(frame, LSHOULDER, RSHOULDER, up,
                                      "shoulder line has no horizontal extent")
    # A twisted or mislabeled skeleton can flip the hip normal; keep it on
    # the shoulder-forward side.
    if np.dot(pelvis_fwd, shoulder_fwd) < 0:
        pelvis_fwd = -pelvis_fwd
    mid_hip = frame.midpoint(LHIP, RHIP)
    mid_wrist = frame.midpoint(LWRIST, RWRIST)
    hand_dir = _horizontal(mid_wrist - mid_hip, up)
    hand_dir = _unit(hand_dir, "hands have no horizontal offset from mid-hip")
    return _angle_deg(pelvis_fwd, hand_dir)


def upper_arm_angle(frame: PoseFrame, up_axis: str = "+z") -> float:
    """Angle between the up axis and shoulder-to-elbow, averaged over the
    available sides. Arm hanging down reads 180."""
    up = axis_vector(up_axis)
    angles = []
    for shoulder, elbow in ((LSHOULDER, LELBOW), (RSHOULDER, RELBOW)):
        if frame.has(shoulder, elbow):
            arm = _unit(frame.position(elbow) - frame.position(shoulder),
                        f"elbow coincides with shoulder ({shoulder})")
            angles.append(_angle_deg(up, arm))
    if not angles:
        raise MissingLandmarkError("no shoulder/elbow pair present", landmark=LSHOULDER)
    return float(np.mean(angles))


def hip_vertical_displacement(seq: PoseSequence) -> TimeSeries:
    """Per-frame mid-hip height along the up axis, zeroed at the first
    frame. Scaled to meters when the sequence is calibrated."""
    up = seq.up()
    vals = np.empty(len(seq))
    for i, frame in enumerate(seq.frames):
        if not frame.has(LHIP, RHIP):
            raise MissingLandmarkError(f"hips missing in frame {i}", landmark=LHIP,
                                       frame_index=i)
        vals[i] = np.dot(frame.midpoint(LHIP, RHIP), up)
    vals = (vals - vals[0]) * seq.scale
    return TimeSeries(vals, seq.nominal_rate_hz, seq.frames[0].time_s,
                      channel_names=("hip_rise",), units="m" if seq.calibration_scale_m_per_unit else "au")


def sacral_rotation(trunk_flexion_deg: float, rhythm: LumbopelvicRhythm) -> float:
    """Pelvic (sacral) rotation in degrees: interpolated pelvic share times
    trunk flexion."""
    return rhythm.pelvic_share(trunk_flexion_deg) * trunk_flexion_deg


METRICS: Dict[str, Callable[[PoseFrame, str], float]] = {
    "trunk_flexion": trunk_flexion,
    "shoulder_to_hand": shoulder_to_hand_distance,
    "asymmetry": asymmetry_angle,
    "upper_arm": upper_arm_angle,
}

_METRIC_LANDMARKS: Dict[str, Tuple[str, ...]] = {
    "trunk_flexion": (LSHOULDER, RSHOULDER, LHIP, RHIP),
    "shoulder_to_hand": (LSHOULDER, RSHOULDER, LWRIST, RWRIST),
    "asymmetry": (LSHOULDER, RSHOULDER, LHIP, RHIP, LWRIST, RWRIST),
    "upper_arm": (LSHOULDER, LELBOW),
}


def metric_series(seq: PoseSequence, metric: str,
                  filter_spec: Optional[FilterSpec] = None,
                  confidence_floor: float = 0.3) -> TimeSeries:
    """Per-frame metric as a TimeSeries at the sequence rate.

    Frames where a required landmark falls below ``confidence_floor`` are
    invalid: interior invalid frames are linearly interpolated, invalid
    frames at either boundary are trimmed (shifting the start time).
    """
    if metric not in METRICS:
        raise InvalidConfigError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    fn = METRICS[metric]
    required = _METRIC_LANDMARKS[metric]

    n = len(seq)
    vals = np.full(n, np.nan)
    valid = np.zeros(n, dtype=bool)
    for i, frame in enumerate(seq.frames):
        ok = all(name in frame.landmarks
                 and frame.landmarks[name].confidence >= confidence_floor
                 for name in required)
        if metric == "upper_arm":
            ok = any(frame.has(s, e)
                     and frame.landmarks[s].confidence >= confidence_floor
                     and frame.landmarks[e].confidence >= confidence_floor
                     for s, e in ((LSHOULDER, LELBOW), (RSHOULDER, RELBOW)))
        if not ok:
            continue
        try:
            vals[i] = fn(frame, seq.up_axis)
        except MissingLandmarkError as err:
            raise MissingLandmarkError(f"{err} (frame {i})", frame_index=i,
                                       **err.context) from err
        valid[i] = True

    if not np.any(valid):
        raise InsufficientDataError(f"no frame has the landmarks for metric {metric!r}")
    first, last = np.argmax(valid), n - 1 - np.argmax(valid[::-1])
    vals = vals[first:last + 1]
    valid_in = valid[first:last + 1]
    if not np.all(valid_in):
        idx = np.arange(len(vals))
        vals = np.interp(idx, idx[valid_in], vals[valid_in])

    out = TimeSeries(vals, seq.nominal_rate_hz,
                     start_time_s=seq.frames[first].time_s,
                     channel_names=(metric,),
                     units="deg" if metric != "shoulder_to_hand" else None)
    if filter_spec is not None:
        out = butterworth_zero_lag(out, filter_spec)
    return out


def point_kinematics(seq: PoseSequence, landmark_name: str, filter_spec: FilterSpec
                     ) -> Tuple[TimeSeries, TimeSeries, TimeSeries]:
    """Position, velocity and acceleration of one landmark.

    Derivatives are second-order finite differences, then zero-lag
    low-pass filtered with ``filter_spec``. Without a calibration scale the
    outputs are in the pose's native units (flagged 'au').
    """
    n = len(seq)
    pos = np.empty((n, 3))
    for i, frame in enumerate(seq.frames):
        if landmark_name not in frame.landmarks:
            raise MissingLandmarkError(f"landmark {landmark_name} missing in frame {i}",
                                       landmark=landmark_name, frame_index=i)
        pos[i] = frame.position(landmark_name)
    pos = pos * seq.scale
    calibrated = seq.calibration_scale_m_per_unit is not None
    names = (f"{landmark_name}_x", f"{landmark_name}_y", f"{landmark_name}_z")
    position = TimeSeries(pos, seq.nominal_rate_hz, seq.frames[0].time_s,
                          channel_names=names, units="m" if calibrated else "au")
    velocity = butterworth_zero_lag(central_diff(position, 1), filter_spec)
    acceleration = butterworth_zero_lag(central_diff(position, 2), filter_spec)
    velocity = velocity.with_data(velocity.data, units="m/s" if calibrated else "au")
    acceleration = acceleration.with_data(acceleration.data,
                                          units="m/s^2" if calibrated else "au")
    return position, velocity, acceleration


def load_name_map(path) -> Dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        mapping = json.load(fh)
    if not isinstance(mapping, dict):
        raise InvalidConfigError(f"landmark mapping {path} must be a JSON object")
    return {str(k): str(v) for k, v in mapping.items()}


def read_pose_jsonl(path, nominal_rate_hz: Optional[float] = None, up_axis: str = "+z",
                    calibration_scale_m_per_unit: Optional[float] = None,
                    name_map: Optional[Mapping[str, str]] = None) -> PoseSequence:
    """Read a keypoint sequence from JSON Lines.

    Each line is one frame: ``{"t": <seconds>, "landmarks": {"<name>":
    {"p": [x, y, z], "c": <confidence>}}}``. Names are passed through the
    adapter map (COCO-17 names by default); unmapped names are kept as is.
    When ``nominal_rate_hz`` is omitted it is inferred from the timestamps.
    """
    mapping = dict(DEFAULT_NAME_MAP)
    if name_map:
        mapping.update(name_map)
    frames: List[PoseFrame] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                t = float(obj["t"])
                marks = {}
                for raw_name, rec in obj["landmarks"].items():
                    name = mapping.get(raw_name, raw_name)
                    marks[name] = Landmark(name, np.asarray(rec["p"], dtype=float),
                                           float(rec.get("c", 1.0)))
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as err:
                raise InvalidInputError(f"{path}:{lineno}: bad keypoint record ({err})",
                                        line=lineno) from err
            frames.append(PoseFrame(t, marks))
    if not frames:
        raise InsufficientDataError(f"{path}: no frames")
    if nominal_rate_hz is None:
        if len(frames) < 2:
            raise InsufficientDataError(f"{path}: cannot infer rate from a single frame")
        nominal_rate_hz = (len(frames) - 1) / (frames[-1].time_s - frames[0].time_s)
    return PoseSequence(tuple(frames), nominal_rate_hz, up_axis,
                        calibration_scale_m_per_unit)
