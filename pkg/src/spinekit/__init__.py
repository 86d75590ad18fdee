"""Spine biomechanics toolkit: pose-keypoint kinematics, Lyapunov stability,
mesh anthropometrics, template tracking, and L4-L5 load estimation."""

from .anthro import (
    BodyDensity,
    TriMesh,
    TrunkMassRegression,
    estimate_error_stats,
    load_obj,
    plane_section_perimeter,
    segment_mass,
    slab_volume,
)
from .kinematics import (
    Landmark,
    LumbopelvicRhythm,
    PoseFrame,
    PoseSequence,
    SubjectAnthropometry,
    asymmetry_angle,
    hip_vertical_displacement,
    metric_series,
    point_kinematics,
    read_pose_jsonl,
    sacral_rotation,
    shoulder_to_hand_distance,
    trunk_flexion,
    upper_arm_angle,
)
from .loads import LoadInputs, RegressionModel, eval_loads, fit_regression, lift_assessment
from .msk import (
    ExternalLoad,
    MuscleFascicle,
    Posture,
    SpineModel,
    dynamic_drive,
    external_moments,
    iterate_posture_coupling,
    joint_reaction,
    load_model_json,
    scale_model,
    solve_muscle_forces,
    solve_static,
)
from .signals import FilterSpec, TimeSeries, butterworth_zero_lag, central_diff, resample_linear
from .stability import (
    DivergenceCurve,
    EmbeddingSpec,
    LyapunovConfig,
    LyapunovResult,
    delay_embed,
    lyapunov_fit,
    lyapunov_from_series,
    rosenstein_divergence,
)
from .track import GrayFrame, Template, head_acceleration_pipeline, ncc_match, track_sequence

__version__ = "0.1.0"
