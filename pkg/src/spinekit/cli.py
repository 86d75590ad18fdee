"""Batch pipeline command line.

Subcommands: kin, stability, anthro, track, msk, loads fit, loads eval,
compare. One TOML config file drives a run; command-line overrides win
over the file. Every run writes plot-ready CSVs plus a summary.json into
the output directory; timestamps live in a separate run_meta.json so the
data outputs are byte-identical across reruns.

Numeric CSV cells use 6 significant digits; summary.json keeps full
precision. Every warning and error carries a stable machine-readable code.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import pathlib
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import anthro as anthro_mod
from . import loads as loads_mod
from . import msk as msk_mod
from . import stability as stability_mod
from . import track as track_mod
from .errors import InvalidConfigError, InvalidInputError, SpinekitError
from .kinematics import (
    LumbopelvicRhythm,
    SubjectAnthropometry,
    hip_vertical_displacement,
    load_name_map,
    metric_series,
    point_kinematics,
    read_pose_jsonl,
)
from .signals import FilterSpec, TimeSeries, butterworth_zero_lag

DATA_DIR = pathlib.Path(__file__).resolve().parent / "data"
DEFAULT_SPINE_MODEL = DATA_DIR / "spine_model.json"
DEFAULT_LOADS_MODEL = DATA_DIR / "loads_model.json"
DEFAULT_TRUNK_COEFFS = DATA_DIR / "trunk_mass_coefficients.json"

CSV_FORMAT = "%.6g"


@dataclass
class Report:
    command: str
    status: str = "ok"
    outputs: List[str] = field(default_factory=list)
    metrics: Dict = field(default_factory=dict)
    warnings: List[Dict] = field(default_factory=list)
    errors: List[Dict] = field(default_factory=list)
    provenance: Dict = field(default_factory=dict)

    def warn(self, code: str, message: str) -> None:
        self.warnings.append({"code": code, "message": message})

    @property
    def exit_status(self) -> int:
        return 0 if not self.errors else 1


def write_series_csv(path, series: TimeSeries) -> None:
    names = series.channel_names or tuple(f"c{i}" for i in range(series.n_channels))
    header = "t," + ",".join(names)
    body = np.column_stack([series.times(), series.data])
    np.savetxt(path, body, delimiter=",", header=header, comments="", fmt=CSV_FORMAT)


def write_table_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [CSV_FORMAT % v if isinstance(v, float) else str(v) for v in row]
            fh.write(",".join(cells) + "\n")


def read_series_csv(path) -> Tuple[List[str], np.ndarray, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if header[0] != "t":
        raise InvalidInputError(f"{path}: first CSV column must be t")
    return header[1:], data[:, 0], data[:, 1:]


# CSV timestamps carry 6 significant digits, so re-ingested grids jitter at
# the print-quantization level rather than float precision.
CSV_TIME_TOL = 0.05


def series_from_csv(path, column: Optional[str] = None) -> TimeSeries:
    names, t, data = read_series_csv(path)
    col = column or names[0]
    if col not in names:
        raise InvalidInputError(f"{path}: no column {col!r}; has {names}")
    return TimeSeries.from_times(t, data[:, names.index(col)], rel_tol=CSV_TIME_TOL,
                                 channel_names=(col,))


def write_summary(out_dir: pathlib.Path, report: Report) -> None:
    payload = {
        "command": report.command,
        "status": "error" if report.errors else "ok",
        "outputs": sorted(report.outputs),
        "metrics": report.metrics,
        "warnings": report.warnings,
        "errors": report.errors,
        "provenance": report.provenance,
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    with open(out_dir / "run_meta.json", "w", encoding="utf-8") as fh:
        json.dump({"written_unix_s": time.time()}, fh)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def series_stats(series: TimeSeries) -> Dict:
    names = series.channel_names or tuple(f"c{i}" for i in range(series.n_channels))
    return {name: {"min": float(series.data[:, i].min()),
                   "max": float(series.data[:, i].max()),
                   "mean": float(series.data[:, i].mean())}
            for i, name in enumerate(names)}


# --- configuration ---

def load_config(path: Optional[str], overrides: Sequence[str]) -> Dict:
    config: Dict = {}
    if path:
        with open(path, "rb") as fh:
            config = tomllib.load(fh)
    for item in overrides:
        if "=" not in item:
            raise InvalidConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = config
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = value
    return config


def section(config: Mapping, name: str, required: Sequence[str] = ()) -> Dict:
    sec = dict(config.get(name, {}))
    missing = [k for k in required if k not in sec]
    if missing:
        raise InvalidConfigError(f"config section [{name}] is missing {missing}",
                                 section=name, missing=missing)
    return sec


def filter_from(config: Mapping) -> FilterSpec:
    sec = section(config, "filter")
    return FilterSpec(order=int(sec.get("order", 5)),
                      cutoff_hz=float(sec.get("cutoff_hz", 1.5)))


def rhythm_from(config: Mapping) -> LumbopelvicRhythm:
    sec = section(config, "rhythm")
    knots = sec.get("knots", [[0.0, 0.35]])
    return LumbopelvicRhythm(tuple((float(a), float(s)) for a, s in knots))


def subject_from(config: Mapping) -> SubjectAnthropometry:
    sec = section(config, "subject", required=("sex", "age_years", "height_m", "weight_kg"))
    return SubjectAnthropometry(sec["sex"], float(sec["age_years"]),
                                float(sec["height_m"]), float(sec["weight_kg"]),
                                float(sec["waist_m"]) if "waist_m" in sec else None)


def pose_sequences(config: Mapping) -> List[Tuple[str, object]]:
    sec = section(config, "pose", required=("keypoints",))
    paths = sec["keypoints"]
    if isinstance(paths, str):
        paths = [paths]
    name_map = load_name_map(sec["mapping_file"]) if sec.get("mapping_file") else None
    out = []
    for p in paths:
        seq = read_pose_jsonl(
            p,
            nominal_rate_hz=float(sec["rate_hz"]) if sec.get("rate_hz") else None,
            up_axis=sec.get("up_axis", "+z"),
            calibration_scale_m_per_unit=(float(sec["scale_m_per_unit"])
                                          if sec.get("scale_m_per_unit") else None),
            name_map=name_map)
        out.append((pathlib.Path(p).stem, seq))
    return out


# --- subcommands ---

def run_kin(config: Mapping, out_dir: pathlib.Path, workers: int = 1) -> Report:
    report = Report("kin")
    sec = section(config, "kin")
    metrics = sec.get("metrics", ["trunk_flexion", "shoulder_to_hand", "asymmetry"])
    floor = float(section(config, "pose").get("confidence_floor", 0.3))
    spec = filter_from(config) if sec.get("filtered", False) else None
    inputs = pose_sequences(config)

    def process(item):
        stem, seq = item
        files, stats = [], {}
        for metric in metrics:
            if metric == "hip_rise":
                series = hip_vertical_displacement(seq)
                if spec is not None:
                    series = butterworth_zero_lag(series, spec)
            else:
                series = metric_series(seq, metric, spec, confidence_floor=floor)
            path = out_dir / f"{stem}_{metric}.csv"
            write_series_csv(path, series)
            files.append(str(path))
            stats[metric] = series_stats(series)[metric]
        if sec.get("point_landmark"):
            pos, vel, acc = point_kinematics(seq, sec["point_landmark"], filter_from(config))
            for label, s in (("position", pos), ("velocity", vel), ("acceleration", acc)):
                path = out_dir / f"{stem}_{sec['point_landmark']}_{label}.csv"
                write_series_csv(path, s)
                files.append(str(path))
            if acc.units == "au":
                report.warn("W_ARBITRARY_UNITS",
                            f"{stem}: no calibration; point kinematics in native units")
        return stem, files, stats

    for stem, files, stats in _parallel(process, inputs, workers):
        report.outputs.extend(files)
        report.metrics[stem] = stats
    return report


def run_stability(config: Mapping, out_dir: pathlib.Path, workers: int = 1) -> Report:
    report = Report("stability")
    sec = section(config, "stability")
    cfg = stability_mod.LyapunovConfig(
        delay_s=float(sec.get("delay_s", 0.6)),
        dimension=int(sec.get("dimension", 2)),
        short_window=tuple(sec.get("short_window", (0.0, 0.5))),
        long_window=tuple(sec.get("long_window", (1.0, 2.5))),
        max_horizon_s=float(sec["max_horizon_s"]) if sec.get("max_horizon_s") else None,
        mean_period_s=float(sec["mean_period_s"]) if sec.get("mean_period_s") else None)

    signals: List[Tuple[str, TimeSeries]] = []
    if sec.get("signal_csv"):
        series = series_from_csv(sec["signal_csv"], sec.get("column"))
        signals.append((pathlib.Path(sec["signal_csv"]).stem, series))
    else:
        metric = sec.get("metric", "trunk_flexion")
        floor = float(section(config, "pose").get("confidence_floor", 0.3))
        for stem, seq in pose_sequences(config):
            signals.append((stem, metric_series(seq, metric, confidence_floor=floor)))

    def process(item):
        stem, series = item
        result, curve = stability_mod.lyapunov_from_series(series, cfg)
        path = out_dir / f"{stem}_divergence.csv"
        body = np.column_stack([curve.mean_log_divergence.times(),
                                curve.mean_log_divergence.values(),
                                curve.valid_pair_count])
        np.savetxt(path, body, delimiter=",", comments="",
                   header="t,mean_log_div,pair_count", fmt=CSV_FORMAT)
        stats = {
            "lambda_short_per_s": result.lambda_short,
            "lambda_long_per_s": result.lambda_long,
            "fit_windows_s": [list(w) for w in result.fit_windows],
            "fit_residuals": list(result.fit_residuals),
        }
        return stem, [str(path)], stats

    for stem, files, stats in _parallel(process, signals, workers):
        report.outputs.extend(files)
        report.metrics[stem] = stats
    return report


def run_anthro(config: Mapping, out_dir: pathlib.Path, workers: int = 1) -> Report:
    report = Report("anthro")
    sec = section(config, "anthro", required=("mesh",))
    mesh = anthro_mod.load_obj(sec["mesh"], up_axis=sec.get("up_axis", "+z"))
    density = anthro_mod.BodyDensity(float(sec.get("density_kg_m3", 1071.0)))
    lo, hi = mesh.axis_extent()
    height = hi - lo

    metrics: Dict = {"mesh_height_m": height, "closed": mesh.closed}
    if "waist_height_m" in sec:
        waist_h = float(sec["waist_height_m"])
    else:
        waist_h = lo + float(sec.get("waist_height_frac", 0.61)) * height
    waist = anthro_mod.plane_section_perimeter(mesh, waist_h)
    metrics["waist_circumference_m"] = waist

    if mesh.closed:
        if "slab_bounds_m" in sec:
            slab_lo, slab_hi = (float(v) for v in sec["slab_bounds_m"])
        else:
            fr = sec.get("slab_fractions", (0.50, 0.82))
            slab_lo, slab_hi = lo + float(fr[0]) * height, lo + float(fr[1]) * height
        volume = anthro_mod.slab_volume(mesh, slab_lo, slab_hi)
        metrics["trunk_slab_volume_m3"] = volume
        metrics["trunk_slab_mass_kg"] = anthro_mod.segment_mass(volume, density)
        total = anthro_mod.mesh_volume(mesh)
        metrics["total_volume_m3"] = total
        metrics["total_mass_kg"] = anthro_mod.segment_mass(total, density)
    else:
        report.warn("W_OPEN_MESH", "open mesh: slab volume and mass skipped")

    coeff_path = sec.get("coefficients_file", str(DEFAULT_TRUNK_COEFFS))
    reg = anthro_mod.TrunkMassRegression.from_json(coeff_path)
    report.provenance["trunk_mass_coefficients"] = {"file": str(coeff_path),
                                                    "provenance": reg.provenance}
    if "subject" in config:
        subject = subject_from(config)
        if subject.waist_circumference_m is None:
            subject = replace(subject, waist_circumference_m=waist)
        est = anthro_mod.trunk_mass_regression_eval(reg, subject)
        metrics["trunk_mass_regression_kg"] = est.mass_kg
        if est.out_of_domain:
            report.warn("W_OUT_OF_DOMAIN", "non-positive trunk mass prediction")

    if sec.get("measured") and sec.get("estimated"):
        stats = anthro_mod.estimate_error_stats([float(v) for v in sec["measured"]],
                                                [float(v) for v in sec["estimated"]])
        metrics["error_stats_pct"] = {"mean": stats.mean_pct, "min": stats.min_pct,
                                      "max": stats.max_pct,
                                      "per_pair": list(stats.per_pair_pct)}

    path = out_dir / "anthro_metrics.csv"
    rows = [(k, float(v)) for k, v in metrics.items()
            if isinstance(v, (int, float)) and not isinstance(v, bool)]
    write_table_csv(path, ("name", "value"), rows)
    report.outputs.append(str(path))
    report.metrics = metrics
    return report


def run_track(config: Mapping, out_dir: pathlib.Path, workers: int = 1) -> Report:
    report = Report("track")
    sec = section(config, "track", required=("frames_dir", "template"))
    frames = track_mod.read_frame_dir(sec["frames_dir"])
    template = track_mod.Template(track_mod.read_pgm(sec["template"]))
    threshold = float(sec.get("threshold", 0.8))
    radius = int(sec["search_radius"]) if sec.get("search_radius") else None
    scale = float(sec["scale_m_per_px"]) if sec.get("scale_m_per_px") else None
    rate = float(sec["rate_hz"]) if sec.get("rate_hz") else None

    accel, results = track_mod.head_acceleration_pipeline(
        frames, template, filter_from(config), threshold, radius, scale, rate)
    _, positions = track_mod.track_sequence(frames, template, threshold, radius, rate)

    pos_path = out_dir / "track_positions.csv"
    write_table_csv(pos_path, ("frame", "x_px", "y_px", "score", "valid"),
                    [(r.frame_index, float(r.x), float(r.y), r.score, int(r.valid))
                     for r in results])
    acc_path = out_dir / "track_acceleration.csv"
    write_series_csv(acc_path, accel)
    report.outputs += [str(pos_path), str(acc_path)]
    invalid = [r.frame_index for r in results if not r.valid]
    if invalid:
        report.warn("W_FRAMES_BELOW_THRESHOLD",
                    f"{len(invalid)} frame(s) under threshold {threshold}: {invalid}")
    if scale is None or rate is None:
        report.warn("W_ARBITRARY_UNITS",
                    "no scale/rate; acceleration in pixel/frame^2 (a.u.)")
    report.metrics = {
        "n_frames": len(frames),
        "n_invalid": len(invalid),
        "acceleration_units": accel.units,
        "acceleration": series_stats(accel),
    }
    return report


def _spine_model(config: Mapping) -> Tuple[msk_mod.SpineModel, str]:
    sec = section(config, "msk")
    path = sec.get("model_file", str(DEFAULT_SPINE_MODEL))
    model = msk_mod.load_model_json(path)
    if sec.get("sigma_max_pa"):
        model = replace(model, sigma_max_pa=float(sec["sigma_max_pa"]))
    if "subject" in config:
        model = msk_mod.scale_model(model, subject_from(config))
    return model, path


def run_msk(config: Mapping, out_dir: pathlib.Path, workers: int = 1) -> Report:
    report = Report("msk")
    sec = section(config, "msk")
    model, model_path = _spine_model(config)
    report.provenance["spine_model"] = {"file": str(model_path), "name": model.name,
                                        "sigma_max_pa": model.sigma_max_pa}
    rhythm = rhythm_from(config)
    level = sec.get("level", "L4L5")
    compliance = float(sec.get("compliance_per_n", 0.0))
    load = msk_mod.ExternalLoad(float(sec.get("load_mass_kg", 0.0)))
    fascicle_names = [f.name for f in model.fascicles]

    if sec.get("flexion_csv"):
        names, t, data = read_series_csv(sec["flexion_csv"])
        flex = TimeSeries.from_times(t, data[:, 0], rel_tol=CSV_TIME_TOL,
                                     channel_names=(names[0],))
        rise = None
        if "hip_rise" in names:
            rise = TimeSeries.from_times(t, data[:, names.index("hip_rise")],
                                         rel_tol=CSV_TIME_TOL)
        load_pos = None
        if "load_x" in names and "load_z" in names:
            cols = np.column_stack([data[:, names.index("load_x")],
                                    data[:, names.index("load_z")]])
            load_pos = TimeSeries.from_times(t, cols, rel_tol=CSV_TIME_TOL)
        arm = None
        if "arm_angle" in names:
            arm = TimeSeries.from_times(t, data[:, names.index("arm_angle")],
                                        rel_tol=CSV_TIME_TOL)
        out = msk_mod.dynamic_drive(model, flex, load, rhythm, rise, arm, load_pos,
                                    arm_length_m=float(sec.get("arm_length_m", 0.55)),
                                    level=level, compliance_per_n=compliance)
        path = out_dir / "msk_frames.csv"
        header = ["t", "compression_n", "shear_n", "max_residual_nm",
                  "converged"] + fascicle_names
        rows = []
        for i, t_i in enumerate(out.times_s):
            rows.append([float(t_i), float(out.compression_n[i]), float(out.shear_n[i]),
                         float(out.residual_nm[i]),
                         int(out.converged[i])] + [float(v) for v in out.forces_n[i]])
        write_table_csv(path, header, rows)
        report.outputs.append(str(path))
        for failure in out.failures:
            report.warn(failure.code, f"frame {failure.frame_index}: {failure.message}")
        report.metrics = {
            "n_frames": len(out.times_s),
            "n_failed": len(out.failures),
            "peak_compression_n": float(np.nanmax(out.compression_n)),
            "peak_shear_n": float(np.nanmax(np.abs(out.shear_n))),
        }
        return report

    posture = msk_mod.Posture.from_rhythm(
        float(sec.get("flexion_deg", 0.0)), rhythm,
        load_position_m=(tuple(float(v) for v in sec["load_position"])
                         if sec.get("load_position") else None))
    result = msk_mod.solve_static(model, posture, load, level, compliance)
    path = out_dir / "msk_static.csv"
    header = ["compression_n", "shear_n", "converged", "iterations",
              "max_residual_nm"] + fascicle_names
    row = [result.reaction.compression_n, result.reaction.shear_n,
           int(result.solution.converged), result.solution.iteration_count,
           float(np.max(np.abs(result.solution.residuals_nm)))] \
        + [float(v) for v in result.solution.forces_n]
    write_table_csv(path, header, [row])
    report.outputs.append(str(path))
    report.metrics = {
        "compression_n": result.reaction.compression_n,
        "shear_n": result.reaction.shear_n,
        "converged": bool(result.solution.converged),
        "iterations": result.solution.iteration_count,
        "level_moments_nm": {lv.name: float(m) for lv, m
                             in zip(model.levels, result.moments_nm)},
        "forces_n": {n: float(v) for n, v in zip(fascicle_names, result.solution.forces_n)},
    }
    return report


def run_loads_fit(config: Mapping, out_dir: pathlib.Path, workers: int = 1) -> Report:
    report = Report("loads fit")
    sec = section(config, "loads")
    model, model_path = _spine_model(config)
    grid_sec = sec.get("grid", {})
    grid_kwargs = {k: tuple(float(v) for v in vs) for k, vs in grid_sec.items()}
    grid = loads_mod.SampleGrid(**grid_kwargs) if grid_kwargs else loads_mod.SampleGrid()
    config_oracle = loads_mod.OracleConfig(
        shear_coupling_n_per_deg_kg=float(sec.get("shear_coupling_n_per_deg_kg", 0.5)))
    samples = loads_mod.generate_training_samples(model, grid, rhythm_from(config),
                                                  config_oracle)
    degree = int(sec.get("degree", 2))
    reg = loads_mod.fit_regression(
        samples, degree=degree,
        provenance=f"degree-{degree} OLS on {model.name}; {config_oracle.describe()}")
    out_path = out_dir / sec.get("output_model", "loads_model.json")
    reg.to_json(out_path)
    report.outputs.append(str(out_path))
    report.provenance["spine_model"] = {"file": str(model_path), "name": model.name}
    report.metrics = {
        "n_samples": len(samples),
        "degree": degree,
        "fit": {k: {"r_squared": s.r_squared, "rms_n": s.rms}
                for k, s in reg.fit_stats.items()},
        "domain_box": {k: list(v) for k, v in reg.domain_box.items()},
    }
    return report


def run_loads_eval(config: Mapping, out_dir: pathlib.Path, workers: int = 1) -> Report:
    report = Report("loads eval")
    sec = section(config, "loads")
    reg_path = sec.get("model_file", str(DEFAULT_LOADS_MODEL))
    reg = loads_mod.RegressionModel.from_json(reg_path)
    report.provenance["loads_model"] = {"file": str(reg_path),
                                        "provenance": reg.provenance}
    subject = subject_from(config)
    load_mass = float(sec.get("load_mass_kg", 0.0))

    def process(item):
        stem, seq = item
        series, summary = loads_mod.lift_assessment(seq, subject, load_mass, reg)
        path = out_dir / f"{stem}_loads.csv"
        write_series_csv(path, series)
        return stem, [str(path)], {
            "peak_compression_n": summary.peak_compression_n,
            "mean_compression_n": summary.mean_compression_n,
            "peak_shear_n": summary.peak_shear_n,
            "peak_frame": summary.peak_frame,
            "extrapolated_fraction": summary.extrapolated_fraction,
        }

    for stem, files, stats in _parallel(process, pose_sequences(config), workers):
        report.outputs.extend(files)
        report.metrics[stem] = stats
        if stats["extrapolated_fraction"] > 0:
            report.warn("W_EXTRAPOLATION",
                        f"{stem}: {stats['extrapolated_fraction']:.0%} of frames "
                        "outside the training box")
    return report


def run_compare(config: Mapping, out_dir: pathlib.Path, workers: int = 1) -> Report:
    """Correlation and absolute error (mean +/- SD) between a reference and
    an estimated series, column by column."""
    report = Report("compare")
    sec = section(config, "compare", required=("reference_csv", "estimated_csv"))
    ref_names, ref_t, ref = read_series_csv(sec["reference_csv"])
    est_names, est_t, est = read_series_csv(sec["estimated_csv"])
    columns = sec.get("columns") or [c for c in ref_names if c in est_names]
    if not columns:
        raise InvalidInputError("no shared columns to compare")
    n = min(len(ref_t), len(est_t))
    if len(ref_t) != len(est_t):
        report.warn("W_LENGTH_MISMATCH",
                    f"series lengths differ ({len(ref_t)} vs {len(est_t)}); "
                    f"comparing the first {n} samples")
    rows = []
    for col in columns:
        a = ref[:n, ref_names.index(col)]
        b = est[:n, est_names.index(col)]
        r = float(np.corrcoef(a, b)[0, 1]) if np.std(a) > 0 and np.std(b) > 0 else 1.0
        err = np.abs(b - a)
        stats = {"correlation": r, "abs_error_mean": float(np.mean(err)),
                 "abs_error_sd": float(np.std(err))}
        report.metrics[col] = stats
        rows.append((col, stats["correlation"], stats["abs_error_mean"],
                     stats["abs_error_sd"]))
    path = out_dir / "compare.csv"
    write_table_csv(path, ("metric", "correlation", "abs_error_mean", "abs_error_sd"),
                    rows)
    report.outputs.append(str(path))
    return report


def _parallel(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


RUNNERS = {
    "kin": run_kin,
    "stability": run_stability,
    "anthro": run_anthro,
    "track": run_track,
    "msk": run_msk,
    ("loads", "fit"): run_loads_fit,
    ("loads", "eval"): run_loads_eval,
    "compare": run_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinekit",
        description="Spine biomechanics batch analyses from poses, meshes, and frames")
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--out-dir", default="spinekit_out", help="output directory")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel workers for multi-file runs")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable; flags win)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("kin", "stability", "anthro", "compare"):
        sub.add_parser(name)
    track_p = sub.add_parser("track")
    track_p.add_argument("--threshold", type=float)
    track_p.add_argument("--search-radius", type=int)
    track_p.add_argument("--scale-m-per-px", type=float)
    track_p.add_argument("--rate-hz", type=float)
    msk_p = sub.add_parser("msk")
    msk_p.add_argument("--sigma-max-pa", type=float)
    loads_p = sub.add_parser("loads")
    loads_sub = loads_p.add_subparsers(dest="loads_command", required=True)
    loads_sub.add_parser("fit")
    loads_sub.add_parser("eval")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    for attr, dotted in (("threshold", "track.threshold"),
                         ("search_radius", "track.search_radius"),
                         ("scale_m_per_px", "track.scale_m_per_px"),
                         ("rate_hz", "track.rate_hz"),
                         ("sigma_max_pa", "msk.sigma_max_pa")):
        if getattr(args, attr, None) is not None:
            overrides.append(f"{dotted}={getattr(args, attr)}")

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    key = (args.command, args.loads_command) if args.command == "loads" else args.command
    command_label = " ".join(key) if isinstance(key, tuple) else key
    try:
        config = load_config(args.config, overrides)
        report = RUNNERS[key](config, out_dir, workers=args.workers)
    except SpinekitError as err:
        report = Report(command_label)
        report.errors.append({"code": err.code, "message": str(err)})
    except FileNotFoundError as err:
        report = Report(command_label)
        report.errors.append({"code": "E_FILE_NOT_FOUND", "message": str(err)})
    write_summary(out_dir, report)
    if args.verbose or report.errors:
        json.dump(report.metrics if not report.errors else report.errors,
                  sys.stdout, indent=2, default=_jsonable)
        sys.stdout.write("\n")
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
