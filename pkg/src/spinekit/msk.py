"""Lumped sagittal-plane spine model (T12-S1): anthropometric scaling,
static muscle-force optimization, posture-coupled iteration, joint
reactions, and a quasi-dynamic per-frame drive.

Mechanical conventions
----------------------
* Sagittal plane coordinates (x, z): x anterior, z up, all relative to the
  spine base (top of the sacrum). Angles measure forward tilt from
  vertical.
* The spine is a chain of rigid links joined at the intervertebral levels.
  The pelvis link below the lowest level tilts by the sacral rotation;
  each level adds its share of the lumbar rotation (trunk minus sacral)
  going up, so the link above the top level tilts by the full trunk
  flexion.
* Level moments are flexion-positive. Extensor muscles have positive
  moment arms; abdominal flexors negative.
* Muscle forces minimize the sum of squared muscle stresses subject to
  moment equilibrium at every level and 0 <= F <= sigma_max * PCSA,
  solved exactly as a convex quadratic program.
* Joint reactions are expressed in the disc frame of the queried level
  (compression along the disc normal, anterior shear in plane), summing
  muscle forces crossing the level with gravity and d'Alembert inertial
  forces of everything superior.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    CapacityExceededError,
    InsufficientDataError,
    InvalidConfigError,
    InvalidInputError,
)
from .kinematics import LumbopelvicRhythm, SubjectAnthropometry, sacral_rotation
from .signals import TimeSeries, central_diff

GRAVITY = 9.81
EQUILIBRIUM_TOL = 1e-6  # N*m
KKT_TOL = 1e-8


@dataclass(frozen=True)
class SpineLevel:
    name: str
    height_m: float        # above the base, upright reference
    rotation_share: float  # fraction of the lumbar rotation taken here

    def __post_init__(self):
        if not (self.height_m > 0):
            raise InvalidConfigError(f"level {self.name}: height must be positive")
        if not (0.0 <= self.rotation_share <= 1.0):
            raise InvalidConfigError(f"level {self.name}: share outside [0, 1]")


@dataclass(frozen=True)
class BodySegment:
    name: str
    mass_kg: float
    height_m: float
    anterior_m: float = 0.0

    def __post_init__(self):
        if self.mass_kg < 0:
            raise InvalidConfigError(f"segment {self.name}: negative mass")


@dataclass(frozen=True)
class MuscleFascicle:
    """Sagittally merged left+right fascicle (PCSA already doubled)."""

    name: str
    levels: Tuple[str, ...]
    moment_arm_m: Tuple[float, ...]     # extensor positive, per crossed level
    pcsa_m2: float
    line_of_action: Tuple[Tuple[float, float], ...] = ()  # (shear, compression) per level

    def __post_init__(self):
        if not (self.pcsa_m2 > 0):
            raise InvalidConfigError(f"fascicle {self.name}: PCSA must be positive")
        if len(self.moment_arm_m) != len(self.levels):
            raise InvalidConfigError(f"fascicle {self.name}: one moment arm per crossed level")
        if any(not np.isfinite(r) or r == 0.0 for r in self.moment_arm_m):
            raise InvalidConfigError(f"fascicle {self.name}: moment arms must be finite and nonzero")
        loa = self.line_of_action or tuple((0.0, 1.0) for _ in self.levels)
        if len(loa) != len(self.levels):
            raise InvalidConfigError(f"fascicle {self.name}: one line of action per crossed level")
        normed = []
        for s, c in loa:
            n = math.hypot(s, c)
            if n < 1e-12:
                raise InvalidConfigError(f"fascicle {self.name}: zero line of action")
            normed.append((s / n, c / n))
        object.__setattr__(self, "line_of_action", tuple(normed))
        object.__setattr__(self, "moment_arm_m", tuple(float(r) for r in self.moment_arm_m))
        object.__setattr__(self, "levels", tuple(self.levels))


@dataclass(frozen=True)
class SpineModel:
    levels: Tuple[SpineLevel, ...]       # cranial to caudal (T12L1 ... L5S1)
    fascicles: Tuple[MuscleFascicle, ...]
    segments: Tuple[BodySegment, ...]
    sigma_max_pa: float
    reference_subject: SubjectAnthropometry
    subject: Optional[SubjectAnthropometry] = None
    pcsa_multipliers: Mapping = field(default_factory=dict)
    name: str = "spine-model"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "fascicles", tuple(self.fascicles))
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.levels:
            raise InvalidConfigError("model needs at least one level")
        if not (self.sigma_max_pa > 0):
            raise InvalidConfigError("maximum muscle stress must be positive")
        names = [lv.name for lv in self.levels]
        if len(set(names)) != len(names):
            raise InvalidConfigError("duplicate level names")
        share_sum = sum(lv.rotation_share for lv in self.levels)
        if abs(share_sum - 1.0) > 1e-6:
            raise InvalidConfigError(f"rotation shares sum to {share_sum}, expected 1")
        heights = [lv.height_m for lv in self.levels]
        if any(h1 <= h2 for h1, h2 in zip(heights, heights[1:])):
            raise InvalidConfigError("levels must be ordered cranial to caudal (descending height)")
        for f in self.fascicles:
            unknown = set(f.levels) - set(names)
            if unknown:
                raise InvalidConfigError(f"fascicle {f.name} crosses unknown levels {unknown}")
        for lv in self.levels:
            if not any(lv.name in f.levels
                       and f.moment_arm_m[f.levels.index(lv.name)] > 0
                       for f in self.fascicles):
                raise InvalidConfigError(
                    f"level {lv.name} has no extensor-capable fascicle; statically insoluble")

    @property
    def level_names(self) -> Tuple[str, ...]:
        return tuple(lv.name for lv in self.levels)

    def level_index(self, name: str) -> int:
        try:
            return self.level_names.index(name)
        except ValueError:
            raise InvalidInputError(f"unknown level {name!r}; model has {self.level_names}")

    def moment_arm_matrix(self) -> np.ndarray:
        """R[level, fascicle] in N*m per N."""
        r = np.zeros((len(self.levels), len(self.fascicles)))
        for j, f in enumerate(self.fascicles):
            for name, arm in zip(f.levels, f.moment_arm_m):
                r[self.level_index(name), j] = arm
        return r

    def force_caps(self) -> np.ndarray:
        return np.array([self.sigma_max_pa * f.pcsa_m2 for f in self.fascicles])


def _age_multiplier(table, age: float) -> float:
    knots = table or [[0.0, 1.0]]
    xs = [k[0] for k in knots]
    ys = [k[1] for k in knots]
    return float(np.interp(age, xs, ys))


def scale_model(reference: SpineModel, subject: SubjectAnthropometry) -> SpineModel:
    """Personalize the reference model.

    Masses scale with body weight; longitudinal locations and moment arms
    scale with body height; PCSA scales with weight^(2/3) times the
    relative sex/age multipliers from the model's table.
    """
    ref = reference.reference_subject
    w_ratio = subject.weight_kg / ref.weight_kg
    h_ratio = subject.height_m / ref.height_m
    table = reference.pcsa_multipliers or {}
    sex_table = table.get("sex", {})
    sex_mult = sex_table.get(subject.sex, 1.0) / sex_table.get(ref.sex, 1.0) \
        if sex_table else 1.0
    age_mult = _age_multiplier(table.get("age_knots"), subject.age_years) \
        / _age_multiplier(table.get("age_knots"), ref.age_years)
    pcsa_scale = w_ratio ** (2.0 / 3.0) * sex_mult * age_mult

    levels = tuple(replace(lv, height_m=lv.height_m * h_ratio) for lv in reference.levels)
    segments = tuple(replace(s, mass_kg=s.mass_kg * w_ratio,
                             height_m=s.height_m * h_ratio,
                             anterior_m=s.anterior_m * h_ratio)
                     for s in reference.segments)
    fascicles = tuple(replace(f,
                              moment_arm_m=tuple(r * h_ratio for r in f.moment_arm_m),
                              pcsa_m2=f.pcsa_m2 * pcsa_scale)
                      for f in reference.fascicles)
    return replace(reference, levels=levels, segments=segments, fascicles=fascicles,
                   subject=subject)


@dataclass(frozen=True)
class Posture:
    """Sagittal configuration: trunk flexion split into sacral rotation and
    per-level lumbar rotations, plus the hand-load position (anterior and
    vertical offsets from the spine base)."""

    trunk_flexion_deg: float
    sacral_rotation_deg: float = 0.0
    load_position_m: Optional[Tuple[float, float]] = None
    base_rise_m: float = 0.0

    @property
    def lumbar_rotation_deg(self) -> float:
        return self.trunk_flexion_deg - self.sacral_rotation_deg

    def level_rotations_deg(self, model: SpineModel) -> np.ndarray:
        return np.array([lv.rotation_share for lv in model.levels]) * self.lumbar_rotation_deg

    @staticmethod
    def from_rhythm(trunk_flexion_deg: float, rhythm: LumbopelvicRhythm,
                    load_position_m: Optional[Tuple[float, float]] = None,
                    base_rise_m: float = 0.0) -> "Posture":
        return Posture(trunk_flexion_deg,
                       sacral_rotation(trunk_flexion_deg, rhythm),
                       load_position_m, base_rise_m)


@dataclass(frozen=True)
class ExternalLoad:
    """Hand-held load and the acceleration state (zero in statics).

    ``acceleration`` is the load's (anterior, vertical) acceleration;
    ``segment_accelerations`` maps segment names to theirs.
    """

    mass_kg: float = 0.0
    acceleration: Tuple[float, float] = (0.0, 0.0)
    segment_accelerations: Mapping[str, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.mass_kg < 0:
            raise InvalidInputError("load mass must be nonnegative")


@dataclass(frozen=True)
class FlexedGeometry:
    """World positions in the flexed configuration.

    ``links`` are (height_lo, height_hi, tilt, x0, z0) spans of the rigid
    chain, bottom to top; heights are longitudinal model coordinates.
    """

    level_xz: Dict[str, Tuple[float, float]]
    level_tilt_rad: Dict[str, float]
    segment_xz: Dict[str, Tuple[float, float]]
    top_xz: Tuple[float, float]
    top_tilt_rad: float
    links: Tuple[Tuple[float, float, float, float, float], ...]

    def locate(self, height_m: float, anterior_m: float = 0.0) -> Tuple[float, float]:
        """World (x, z) of a chain point at a longitudinal height and
        anterior offset."""
        chosen = self.links[0]
        for link in self.links:
            chosen = link
            if link[0] <= height_m <= link[1]:
                break
        h_lo, _, angle, x0, z0 = chosen
        dx, dz = math.sin(angle), math.cos(angle)
        return (x0 + (height_m - h_lo) * dx + anterior_m * dz,
                z0 + (height_m - h_lo) * dz - anterior_m * dx)


def flexed_geometry(model: SpineModel, posture: Posture) -> FlexedGeometry:
    """Walk the link chain from the base upward."""
    rots = np.radians(posture.level_rotations_deg(model))
    order = np.argsort([lv.height_m for lv in model.levels])  # caudal first
    angle = math.radians(posture.sacral_rotation_deg)
    x, z = 0.0, posture.base_rise_m
    prev_h = 0.0
    level_xz: Dict[str, Tuple[float, float]] = {}
    level_tilt: Dict[str, float] = {}
    link_angles: List[Tuple[float, float, float, float, float]] = []  # (h_lo, h_hi, angle, x0, z0)
    for k in order:
        lv = model.levels[k]
        dh = lv.height_m - prev_h
        link_angles.append((prev_h, lv.height_m, angle, x, z))
        x += dh * math.sin(angle)
        z += dh * math.cos(angle)
        level_xz[lv.name] = (x, z)
        level_tilt[lv.name] = angle + 0.5 * rots[k]
        angle += rots[k]
        prev_h = lv.height_m
    top_h = max([s.height_m for s in model.segments] + [prev_h]) + 1.0
    link_angles.append((prev_h, top_h, angle, x, z))

    geometry = FlexedGeometry(level_xz, level_tilt, {}, (x, z), angle,
                              tuple(link_angles))
    seg_xz = {s.name: geometry.locate(s.height_m, s.anterior_m) for s in model.segments}
    return replace(geometry, segment_xz=seg_xz)


def chain_point(model: SpineModel, posture: Posture, height_m: float,
                anterior_m: float = 0.0) -> Tuple[float, float]:
    """World (x, z) of a point riding the flexed chain at the given
    longitudinal height and anterior offset (model coordinates)."""
    return flexed_geometry(model, posture).locate(height_m, anterior_m)


def external_moments(model: SpineModel, posture: Posture, load: ExternalLoad,
                     gravity: float = GRAVITY) -> np.ndarray:
    """Net flexion moment (N*m) at every level from gravity and inertial
    forces of all superior segments plus the hand load.

    Per contributor at (x, z) with mass m and acceleration (ax, az), the
    moment about a level at (xl, zl) is
    m * (g + az) * (x - xl) - m * ax * (z - zl).
    """
    geo = flexed_geometry(model, posture)
    moments = np.zeros(len(model.levels))
    contributors: List[Tuple[float, Tuple[float, float], Tuple[float, float], float]] = []
    for seg in model.segments:
        acc = tuple(load.segment_accelerations.get(seg.name, (0.0, 0.0)))
        contributors.append((seg.mass_kg, geo.segment_xz[seg.name], acc, seg.height_m))
    if load.mass_kg > 0:
        if posture.load_position_m is None:
            raise InvalidInputError("posture needs a load position for a nonzero load mass")
        lx, lz = posture.load_position_m
        contributors.append((load.mass_kg, (lx, lz + posture.base_rise_m),
                             tuple(load.acceleration), float("inf")))
    for i, lv in enumerate(model.levels):
        xl, zl = geo.level_xz[lv.name]
        for mass, (x, z), (ax, az), height in contributors:
            if height <= lv.height_m:
                continue  # not superior to this level
            moments[i] += mass * (gravity + az) * (x - xl) - mass * ax * (z - zl)
    return moments


@dataclass(frozen=True)
class MuscleSolution:
    forces_n: np.ndarray
    iteration_count: int
    converged: bool
    residuals_nm: np.ndarray
    kkt_residual: float
    objective: float

    def __post_init__(self):
        f = np.asarray(self.forces_n, dtype=float).copy()
        r = np.asarray(self.residuals_nm, dtype=float).copy()
        f.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "forces_n", f)
        object.__setattr__(self, "residuals_nm", r)
        if self.converged and np.max(np.abs(r), initial=0.0) >= EQUILIBRIUM_TOL:
            raise InvalidInputError("converged solution with equilibrium residual above tolerance")


def _capacity_report(model: SpineModel, moments: np.ndarray) -> Tuple[Optional[int], List[float]]:
    """Per-level supportable moment range; returns the first violated level."""
    r = model.moment_arm_matrix()
    caps = model.force_caps()
    hi = np.sum(np.maximum(r * caps, 0.0), axis=1)
    lo = np.sum(np.minimum(r * caps, 0.0), axis=1)
    limiting = None
    for i, m in enumerate(moments):
        if m > hi[i] + 1e-9 or m < lo[i] - 1e-9:
            limiting = i
            break
    return limiting, list(hi)


def solve_muscle_forces(model: SpineModel, moments: np.ndarray) -> MuscleSolution:
    """Minimum sum of squared muscle stresses meeting all level moments.

    minimize sum_i (F_i / PCSA_i)^2
    s.t. sum_i r_il F_i = M_l for every level l, 0 <= F_i <= sigma_max PCSA_i

    Solved by semismooth Newton on the dual: for multipliers lam the
    box-projected primal is F(lam) = clip(PCSA^2 (R^T lam) / 2, 0, cap);
    the dual equation R F(lam) = M is piecewise linear and monotone.
    """
    moments = np.asarray(moments, dtype=float)
    if moments.shape != (len(model.levels),):
        raise InvalidInputError(
            f"expected {len(model.levels)} level moments, got {moments.shape}")
    r = model.moment_arm_matrix()
    caps = model.force_caps()
    a2 = np.array([f.pcsa_m2 for f in model.fascicles]) ** 2

    limiting, supportable = _capacity_report(model, moments)
    if limiting is not None:
        raise CapacityExceededError(
            f"moment {moments[limiting]:.1f} N*m at {model.levels[limiting].name} exceeds "
            f"the supportable {supportable[limiting]:.1f} N*m",
            level=model.levels[limiting].name,
            max_supportable_nm={lv.name: s for lv, s in zip(model.levels, supportable)})

    def primal(lam):
        return np.clip(a2 * (r.T @ lam) / 2.0, 0.0, caps)

    def moment_gap(lam):
        return r @ primal(lam) - moments

    # Maximize the concave dual g(lam); its gradient is -moment_gap. Each
    # outer step takes a regularized Newton direction and finds the exact
    # maximizer along it by bisecting the monotone directional derivative,
    # which cannot stall on the clipped (flat) pieces of the dual.
    k = len(model.levels)
    lam = np.zeros(k)
    phi = moment_gap(lam)
    scale = max(1.0, float(np.max(np.abs(moments))))
    tol = max(1e-9, 1e-13 * scale)
    n_iter = 0
    infeasible_ray = False
    for n_iter in range(1, 201):
        if np.max(np.abs(phi)) < tol:
            break
        unclipped = a2 * (r.T @ lam) / 2.0
        free = (unclipped > 0.0) & (unclipped < caps)
        d = np.where(free, a2 / 2.0, 0.0)
        jac = (r * d) @ r.T
        reg = 1e-10 * max(float(np.max(np.abs(jac))), float(np.max(a2)) / 2.0, 1e-30)
        try:
            step = np.linalg.solve(jac + reg * np.eye(k), -phi)
        except np.linalg.LinAlgError:
            step = -phi
        if -(step @ phi) <= 0.0:
            step = -phi  # fall back to steepest ascent of the dual

        def deriv(alpha):
            return -(step @ moment_gap(lam + alpha * step))

        hi = 1.0
        while deriv(hi) > 0.0:
            hi *= 2.0
            if hi > 1e18:
                infeasible_ray = True
                break
        if infeasible_ray:
            break
        lo = 0.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if deriv(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        lam = lam + hi * step
        phi = moment_gap(lam)

    forces = primal(lam)
    residuals = r @ forces - moments
    kkt = float(np.max(np.abs(residuals), initial=0.0))
    if kkt >= EQUILIBRIUM_TOL:
        limiting = int(np.argmax(np.abs(residuals)))
        raise CapacityExceededError(
            f"no feasible muscle recruitment: residual {residuals[limiting]:.3g} N*m at "
            f"{model.levels[limiting].name}",
            level=model.levels[limiting].name,
            max_supportable_nm={lv.name: s for lv, s in zip(model.levels, supportable)})
    objective = float(np.sum((forces / np.sqrt(a2)) ** 2))
    return MuscleSolution(forces, n_iter, True, residuals, kkt, objective)


def iterate_posture_coupling(model: SpineModel, posture: Posture, load: ExternalLoad,
                             compliance_per_n: float = 0.0,
                             rel_tol: float = 0.05, max_iter: int = 50,
                             gravity: float = GRAVITY) -> MuscleSolution:
    """Alternate moment updates and muscle solves until forces settle.

    Muscle compression shortens the effective gravity lever arms: after
    each solve the external moments are rescaled by 1 / (1 + compliance *
    total muscle force) and the QP repeats, until every fascicle force
    changes by less than ``rel_tol`` (relative, against a 1 N floor).
    A zero compliance is rigid: the first solve is the answer.
    """
    base_moments = external_moments(model, posture, load, gravity)
    if compliance_per_n == 0.0:
        sol = solve_muscle_forces(model, base_moments)
        return replace(sol, iteration_count=1)
    prev: Optional[np.ndarray] = None
    total = 0.0
    solution = None
    for it in range(1, max_iter + 1):
        moments = base_moments / (1.0 + compliance_per_n * total)
        solution = solve_muscle_forces(model, moments)
        forces = solution.forces_n
        if prev is not None:
            change = np.abs(forces - prev) / np.maximum(np.abs(prev), 1.0)
            if np.max(change, initial=0.0) < rel_tol:
                return replace(solution, iteration_count=it, converged=True)
        prev = forces
        total = float(np.sum(forces))
    return replace(solution, iteration_count=max_iter, converged=False)


@dataclass(frozen=True)
class JointReaction:
    compression_n: float
    shear_n: float


def joint_reaction(model: SpineModel, posture: Posture, solution: MuscleSolution,
                   load: ExternalLoad, level: str = "L4L5",
                   gravity: float = GRAVITY) -> JointReaction:
    """Disc-frame force at a level: muscle forces crossing it plus gravity
    and inertial forces of everything superior."""
    idx = model.level_index(level)
    lv = model.levels[idx]
    geo = flexed_geometry(model, posture)
    tilt = geo.level_tilt_rad[lv.name]
    sin_t, cos_t = math.sin(tilt), math.cos(tilt)

    compression = 0.0
    shear = 0.0
    for f, force in zip(model.fascicles, solution.forces_n):
        if lv.name in f.levels:
            s, c = f.line_of_action[f.levels.index(lv.name)]
            compression += force * c
            shear += force * s

    mg_x = 0.0   # sum m * ax
    mg_gz = 0.0  # sum m * (g + az)
    for seg in model.segments:
        if seg.height_m <= lv.height_m:
            continue
        ax, az = load.segment_accelerations.get(seg.name, (0.0, 0.0))
        mg_x += seg.mass_kg * ax
        mg_gz += seg.mass_kg * (gravity + az)
    if load.mass_kg > 0:
        ax, az = load.acceleration
        mg_x += load.mass_kg * ax
        mg_gz += load.mass_kg * (gravity + az)
    compression += mg_x * sin_t + mg_gz * cos_t
    shear += -mg_x * cos_t + mg_gz * sin_t
    return JointReaction(compression, shear)


@dataclass(frozen=True)
class StaticResult:
    solution: MuscleSolution
    reaction: JointReaction
    moments_nm: np.ndarray


def solve_static(model: SpineModel, posture: Posture, load: ExternalLoad,
                 level: str = "L4L5", compliance_per_n: float = 0.0,
                 gravity: float = GRAVITY) -> StaticResult:
    """Moments, muscle recruitment, and the joint reaction for one posture."""
    moments = external_moments(model, posture, load, gravity)
    solution = iterate_posture_coupling(model, posture, load, compliance_per_n,
                                        gravity=gravity)
    reaction = joint_reaction(model, posture, solution, load, level, gravity)
    return StaticResult(solution, reaction, moments)


@dataclass(frozen=True)
class FrameFailure:
    frame_index: int
    code: str
    message: str


@dataclass(frozen=True)
class DynamicResult:
    """Per-frame reactions; frames whose solve failed carry NaN."""

    times_s: np.ndarray
    compression_n: np.ndarray
    shear_n: np.ndarray
    forces_n: np.ndarray          # (n_frames, n_fascicles), NaN on failure
    residual_nm: np.ndarray       # max level residual per frame
    converged: np.ndarray         # bool per frame
    failures: Tuple[FrameFailure, ...]

    @property
    def peak_compression_n(self) -> float:
        return float(np.nanmax(self.compression_n))


def dynamic_drive(model: SpineModel,
                  flexion_deg: TimeSeries,
                  load: ExternalLoad,
                  rhythm: LumbopelvicRhythm = LumbopelvicRhythm(),
                  hip_rise_m: Optional[TimeSeries] = None,
                  arm_angle_deg: Optional[TimeSeries] = None,
                  load_position_m: Optional[TimeSeries] = None,
                  arm_length_m: float = 0.55,
                  level: str = "L4L5",
                  compliance_per_n: float = 0.0,
                  gravity: float = GRAVITY) -> DynamicResult:
    """Quasi-dynamic frame-by-frame solve driven by parameter series.

    Postures come from the flexion series (sacral rotation via the rhythm);
    the load rides either an explicit position series or the arm direction
    from the chain top. Segment and load accelerations are second-order
    finite differences of their positions and enter the per-frame statics
    as d'Alembert terms. Frames whose solve fails are recorded and skipped.
    """
    n = flexion_deg.n_samples
    if n < 5:
        raise InsufficientDataError("need at least 5 frames for accelerations")
    rate = flexion_deg.sample_rate_hz
    for other in (hip_rise_m, arm_angle_deg, load_position_m):
        if other is not None and (other.n_samples != n or other.sample_rate_hz != rate):
            raise InvalidInputError("driving series must share length and rate")

    flex = flexion_deg.values()
    rise = hip_rise_m.values() if hip_rise_m is not None else np.zeros(n)
    postures: List[Posture] = []
    load_xy = np.zeros((n, 2))
    for i in range(n):
        posture = Posture.from_rhythm(float(flex[i]), rhythm, base_rise_m=float(rise[i]))
        if load.mass_kg > 0:
            if load_position_m is not None:
                load_xy[i] = load_position_m.data[i]
            elif arm_angle_deg is not None:
                geo = flexed_geometry(model, posture)
                al = math.radians(float(arm_angle_deg.values()[i]))
                load_xy[i] = (geo.top_xz[0] + arm_length_m * math.sin(al),
                              geo.top_xz[1] + arm_length_m * math.cos(al))
            else:
                raise InvalidInputError(
                    "dynamic load needs a position series or an arm angle series")
            # load position is stored base-relative; remove the base rise
            posture = replace(posture, load_position_m=(float(load_xy[i, 0]),
                                                        float(load_xy[i, 1]) - float(rise[i])))
        postures.append(posture)

    seg_names = [s.name for s in model.segments]
    seg_pos = np.zeros((n, 2 * len(seg_names)))
    for i, posture in enumerate(postures):
        geo = flexed_geometry(model, posture)
        for j, name in enumerate(seg_names):
            seg_pos[i, 2 * j: 2 * j + 2] = geo.segment_xz[name]
    seg_acc = central_diff(TimeSeries(seg_pos, rate), 2).data
    load_acc = central_diff(TimeSeries(load_xy, rate), 2).data \
        if load.mass_kg > 0 else np.zeros((n, 2))

    compression = np.full(n, np.nan)
    shear = np.full(n, np.nan)
    forces = np.full((n, len(model.fascicles)), np.nan)
    residuals = np.full(n, np.nan)
    converged = np.zeros(n, dtype=bool)
    failures: List[FrameFailure] = []
    for i, posture in enumerate(postures):
        seg_accels = {name: (float(seg_acc[i, 2 * j]), float(seg_acc[i, 2 * j + 1]))
                      for j, name in enumerate(seg_names)}
        frame_load = replace(load,
                             acceleration=(float(load_acc[i, 0]), float(load_acc[i, 1])),
                             segment_accelerations=seg_accels)
        try:
            result = solve_static(model, posture, frame_load, level,
                                  compliance_per_n, gravity)
        except (CapacityExceededError, InvalidInputError) as err:
            failures.append(FrameFailure(i, err.code, str(err)))
            continue
        compression[i] = result.reaction.compression_n
        shear[i] = result.reaction.shear_n
        forces[i] = result.solution.forces_n
        residuals[i] = float(np.max(np.abs(result.solution.residuals_nm), initial=0.0))
        converged[i] = result.solution.converged
    if np.all(np.isnan(compression)):
        raise CapacityExceededError("every frame failed to solve",
                                    failures=len(failures))
    return DynamicResult(flexion_deg.times(), compression, shear,
                         forces, residuals, converged, tuple(failures))


def load_model_json(path) -> SpineModel:
    """Model file: levels, segments, fascicles, reference anthropometry,
    maximum muscle stress, optional PCSA multiplier tables."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        ref = obj["reference_subject"]
        subject = SubjectAnthropometry(ref["sex"], ref["age_years"], ref["height_m"],
                                       ref["weight_kg"], ref.get("waist_circumference_m"))
        levels = tuple(SpineLevel(lv["name"], lv["height_m"], lv["rotation_share"])
                       for lv in obj["levels"])
        segments = tuple(BodySegment(s["name"], s["mass_kg"], s["height_m"],
                                     s.get("anterior_m", 0.0))
                         for s in obj["segments"])
        fascicles = tuple(
            MuscleFascicle(f["name"], tuple(f["levels"]), tuple(f["moment_arm_m"]),
                           f["pcsa_m2"],
                           tuple(tuple(v) for v in f.get("line_of_action", [])))
            for f in obj["fascicles"])
        return SpineModel(levels, fascicles, segments, obj["sigma_max_pa"], subject,
                          pcsa_multipliers=obj.get("pcsa_multipliers", {}),
                          name=obj.get("name", "spine-model"))
    except KeyError as err:
        raise InvalidConfigError(f"{path}: missing model field {err}") from err
