"""Regression-equation L4-L5 load estimator: a fast in-field path trained
against the musculoskeletal solver.

The model is a polynomial (degree 2 by default, all pairwise interactions)
over six inputs: trunk flexion, normalized load lever arm, asymmetry
angle, load mass, and the subject's height and weight. Inputs outside the
training box are flagged as extrapolation but still evaluated.

The sagittal solver carries no asymmetry; training samples inject its
effect through a configurable shear surrogate (newtons per degree per
kilogram of load), recorded in the model provenance. That term is a
modeling convenience, not a mechanical derivation.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateDesignError, InvalidConfigError, InvalidInputError
from .kinematics import (
    LumbopelvicRhythm,
    PoseSequence,
    SubjectAnthropometry,
    asymmetry_angle,
    shoulder_to_hand_distance,
    trunk_flexion,
)
from .errors import DegenerateGeometryError
from .msk import ExternalLoad, Posture, SpineModel, chain_point, scale_model, solve_static
from .signals import TimeSeries

FEATURE_NAMES = ("flexion_deg", "lever_norm", "asymmetry_deg",
                 "load_mass_kg", "height_m", "weight_kg")


@dataclass(frozen=True)
class LoadInputs:
    flexion_deg: float
    lever_norm: float
    asymmetry_deg: float
    load_mass_kg: float
    height_m: float
    weight_kg: float

    def vector(self) -> np.ndarray:
        return np.array([self.flexion_deg, self.lever_norm, self.asymmetry_deg,
                         self.load_mass_kg, self.height_m, self.weight_kg])


def monomial_terms(degree: int) -> Tuple[Tuple[int, ...], ...]:
    """Exponent index tuples for all monomials up to the given degree,
    e.g. () for the intercept, (0,) for flexion, (0, 3) for flexion*load."""
    terms: List[Tuple[int, ...]] = []
    for d in range(degree + 1):
        terms.extend(itertools.combinations_with_replacement(range(len(FEATURE_NAMES)), d))
    return tuple(terms)


def design_row(x: np.ndarray, terms: Sequence[Tuple[int, ...]]) -> np.ndarray:
    return np.array([np.prod(x[list(t)]) if t else 1.0 for t in terms])


@dataclass(frozen=True)
class FitStats:
    r_squared: float
    rms: float


@dataclass(frozen=True)
class RegressionModel:
    degree: int
    compression_coeffs: Tuple[float, ...]
    shear_coeffs: Tuple[float, ...]
    domain_box: Mapping[str, Tuple[float, float]]
    provenance: str = ""
    fit_stats: Mapping[str, FitStats] = field(default_factory=dict)

    def __post_init__(self):
        n_terms = len(monomial_terms(self.degree))
        if len(self.compression_coeffs) != n_terms or len(self.shear_coeffs) != n_terms:
            raise InvalidConfigError(
                f"degree-{self.degree} model needs {n_terms} coefficients per target")
        if set(self.domain_box) != set(FEATURE_NAMES):
            raise InvalidConfigError(f"domain box must cover {FEATURE_NAMES}")
        for name, (lo, hi) in self.domain_box.items():
            if not (lo <= hi):
                raise InvalidConfigError(f"empty domain for {name}")

    def to_json(self, path) -> None:
        payload = {
            "degree": self.degree,
            "features": list(FEATURE_NAMES),
            "compression_coeffs": list(self.compression_coeffs),
            "shear_coeffs": list(self.shear_coeffs),
            "domain_box": {k: list(v) for k, v in self.domain_box.items()},
            "provenance": self.provenance,
            "fit_stats": {k: {"r_squared": s.r_squared, "rms": s.rms}
                          for k, s in self.fit_stats.items()},
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    @staticmethod
    def from_json(path) -> "RegressionModel":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        stats = {k: FitStats(v["r_squared"], v["rms"])
                 for k, v in obj.get("fit_stats", {}).items()}
        return RegressionModel(obj["degree"], tuple(obj["compression_coeffs"]),
                               tuple(obj["shear_coeffs"]),
                               {k: tuple(v) for k, v in obj["domain_box"].items()},
                               obj.get("provenance", ""), stats)


@dataclass(frozen=True)
class LoadEstimate:
    compression_n: float
    shear_n: float
    extrapolated: bool


def eval_loads(reg: RegressionModel, inputs: LoadInputs) -> LoadEstimate:
    """Polynomial evaluation; out-of-box inputs flag the estimate
    instead of failing."""
    x = inputs.vector()
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("load inputs must be finite")
    row = design_row(x, monomial_terms(reg.degree))
    extrapolated = any(not (lo <= v <= hi)
                       for v, (lo, hi) in zip(x, (reg.domain_box[n] for n in FEATURE_NAMES)))
    return LoadEstimate(float(row @ reg.compression_coeffs),
                        float(row @ reg.shear_coeffs), extrapolated)


def fit_regression(samples: Sequence[Tuple[LoadInputs, Tuple[float, float]]],
                   degree: int = 2, provenance: str = "") -> RegressionModel:
    """Ordinary least squares per target over polynomial features.

    Requires at least 10x as many samples as features and a full-rank
    design (inputs spanning a nondegenerate box).
    """
    terms = monomial_terms(degree)
    if len(samples) < 10 * len(terms):
        raise InvalidInputError(
            f"need >= {10 * len(terms)} samples for degree {degree}, got {len(samples)}")
    xs = np.array([inp.vector() for inp, _ in samples])
    design = np.array([design_row(x, terms) for x in xs])
    rank = np.linalg.matrix_rank(design)
    if rank < len(terms):
        raise DegenerateDesignError(
            f"design matrix rank {rank} < {len(terms)}; inputs do not span the box")
    targets = np.array([[c, s] for _, (c, s) in samples])
    coeffs, *_ = np.linalg.lstsq(design, targets, rcond=None)
    pred = design @ coeffs
    stats = {}
    for j, name in enumerate(("compression", "shear")):
        resid = targets[:, j] - pred[:, j]
        ss_res = float(np.sum(resid ** 2))
        ss_tot = float(np.sum((targets[:, j] - np.mean(targets[:, j])) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        stats[name] = FitStats(r2, math.sqrt(ss_res / len(samples)))
    box = {name: (float(xs[:, i].min()), float(xs[:, i].max()))
           for i, name in enumerate(FEATURE_NAMES)}
    return RegressionModel(degree, tuple(coeffs[:, 0]), tuple(coeffs[:, 1]), box,
                           provenance, stats)


@dataclass(frozen=True)
class OracleConfig:
    """How regression inputs map onto the sagittal solver.

    The hand load sits ``hand_drop_m`` below the shoulder point and
    ``lever_norm * shoulder_width`` anterior of it; shoulder height and
    width are fractions of the reference chain, rescaled with stature.
    """

    shoulder_height_m: float = 0.45
    shoulder_width_m: float = 0.40
    hand_drop_m: float = 0.30
    shear_coupling_n_per_deg_kg: float = 0.5
    reference_height_m: float = 1.75

    def describe(self) -> str:
        return (f"shoulder at {self.shoulder_height_m} m, width {self.shoulder_width_m} m, "
                f"hands {self.hand_drop_m} m below (reference stature "
                f"{self.reference_height_m} m); asymmetry shear surrogate "
                f"{self.shear_coupling_n_per_deg_kg} N per deg per kg of load")


def msk_load_oracle(inputs: LoadInputs, reference: SpineModel,
                    rhythm: LumbopelvicRhythm = LumbopelvicRhythm(),
                    config: OracleConfig = OracleConfig()) -> Tuple[float, float]:
    """L4-L5 compression and shear from the scaled static solver for one
    input combination."""
    subject = SubjectAnthropometry(reference.reference_subject.sex,
                                   reference.reference_subject.age_years,
                                   inputs.height_m, inputs.weight_kg)
    model = scale_model(reference, subject)
    h_ratio = inputs.height_m / config.reference_height_m
    posture = Posture.from_rhythm(inputs.flexion_deg, rhythm)
    sx, sz = chain_point(model, posture, config.shoulder_height_m * h_ratio)
    load_pos = (sx + inputs.lever_norm * config.shoulder_width_m * h_ratio,
                sz - config.hand_drop_m * h_ratio)
    posture = replace(posture, load_position_m=load_pos)
    result = solve_static(model, posture, ExternalLoad(inputs.load_mass_kg))
    shear = result.reaction.shear_n \
        + config.shear_coupling_n_per_deg_kg * inputs.asymmetry_deg * inputs.load_mass_kg
    return result.reaction.compression_n, shear


@dataclass(frozen=True)
class SampleGrid:
    flexion_deg: Tuple[float, ...] = (0.0, 15.0, 30.0, 45.0, 60.0)
    lever_norm: Tuple[float, ...] = (0.0, 0.5, 1.0)
    asymmetry_deg: Tuple[float, ...] = (0.0, 10.0, 20.0)
    load_mass_kg: Tuple[float, ...] = (0.0, 10.0, 20.0)
    height_m: Tuple[float, ...] = (1.65, 1.75, 1.85)
    weight_kg: Tuple[float, ...] = (60.0, 75.0, 90.0)

    def points(self):
        for combo in itertools.product(self.flexion_deg, self.lever_norm,
                                       self.asymmetry_deg, self.load_mass_kg,
                                       self.height_m, self.weight_kg):
            yield LoadInputs(*combo)


def generate_training_samples(reference: SpineModel,
                              grid: SampleGrid = SampleGrid(),
                              rhythm: LumbopelvicRhythm = LumbopelvicRhythm(),
                              config: OracleConfig = OracleConfig()
                              ) -> List[Tuple[LoadInputs, Tuple[float, float]]]:
    return [(inputs, msk_load_oracle(inputs, reference, rhythm, config))
            for inputs in grid.points()]


@dataclass(frozen=True)
class LiftSummary:
    peak_compression_n: float
    mean_compression_n: float
    peak_shear_n: float
    extrapolated_fraction: float
    peak_frame: int


def lift_assessment(seq: PoseSequence, subject: SubjectAnthropometry,
                    load_mass_kg: float, reg: RegressionModel
                    ) -> Tuple[TimeSeries, LiftSummary]:
    """Static per-frame load estimates along a pose sequence.

    Each frame contributes (flexion, lever, asymmetry) to the regression;
    frames with the hands on the pelvis midline count as symmetric.
    """
    n = len(seq)
    comp = np.empty(n)
    shear = np.empty(n)
    extrapolated = np.zeros(n, dtype=bool)
    for i, frame in enumerate(seq.frames):
        flex = trunk_flexion(frame, seq.up_axis)
        lever = shoulder_to_hand_distance(frame, seq.up_axis)
        try:
            asym = asymmetry_angle(frame, seq.up_axis)
        except DegenerateGeometryError:
            asym = 0.0
        est = eval_loads(reg, LoadInputs(flex, lever, asym, load_mass_kg,
                                         subject.height_m, subject.weight_kg))
        comp[i], shear[i] = est.compression_n, est.shear_n
        extrapolated[i] = est.extrapolated
    series = TimeSeries(np.column_stack([comp, shear]), seq.nominal_rate_hz,
                        seq.frames[0].time_s, ("compression_n", "shear_n"), "N")
    summary = LiftSummary(float(np.max(comp)), float(np.mean(comp)),
                          float(np.max(np.abs(shear))),
                          float(np.mean(extrapolated)), int(np.argmax(comp)))
    return series, summary
