import filecmp
import json
import pathlib

import numpy as np
import pytest

from spinekit.cli import main, read_series_csv, write_series_csv
from spinekit.signals import TimeSeries
from spinekit.synth import box_mesh, icosphere, logistic_map, sine_wave, skeleton_frame

from conftest import write_pose_jsonl, write_toml


def run_cli(*argv):
    return main([str(a) for a in argv])


def write_full_precision_csv(path, series):
    # fixture inputs keep all digits; the 6-digit rule is for tool outputs
    body = np.column_stack([series.times(), series.data])
    names = series.channel_names or ("c0",)
    np.savetxt(path, body, delimiter=",", comments="",
               header="t," + ",".join(names), fmt="%.17g")


def summary_of(out_dir):
    with open(pathlib.Path(out_dir) / "summary.json", encoding="utf-8") as fh:
        return json.load(fh)


def write_obj(path, vertices, triangles):
    with open(path, "w", encoding="utf-8") as fh:
        for v in vertices:
            fh.write(f"v {v[0]} {v[1]} {v[2]}\n")
        for t in triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


class TestKin:
    def test_upright_sequence_near_zero_flexion(self, tmp_path):
        pose = tmp_path / "upright.jsonl"
        write_pose_jsonl(pose, [skeleton_frame(i / 30.0) for i in range(40)])
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[pose]
keypoints = "{pose}"
[kin]
metrics = ["trunk_flexion"]
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "kin") == 0
        names, _, data = read_series_csv(out / "upright_trunk_flexion.csv")
        assert names == ["trunk_flexion"]
        assert np.allclose(data, 0.0, atol=1e-6)

    def test_bow_peak_matches_generator(self, tmp_path, write_bow_fixture):
        pose = write_bow_fixture(mean=30.0, amp=20.0)
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[pose]
keypoints = "{pose}"
[kin]
metrics = ["trunk_flexion"]
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "kin") == 0
        stats = summary_of(out)["metrics"]["bow"]["trunk_flexion"]
        assert stats["max"] == pytest.approx(50.0, abs=0.01)
        assert stats["min"] == pytest.approx(10.0, abs=0.01)

    def test_missing_landmark_sets_error_code(self, tmp_path):
        pose = tmp_path / "nolegs.jsonl"
        frames = []
        for i in range(20):
            frame = skeleton_frame(i / 30.0)
            marks = {k: v for k, v in frame.landmarks.items() if "Hip" not in k}
            frames.append(type(frame)(frame.time_s, marks))
        write_pose_jsonl(pose, frames)
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[pose]
keypoints = "{pose}"
[kin]
metrics = ["trunk_flexion"]
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "kin") == 1
        summary = summary_of(out)
        assert summary["status"] == "error"
        assert summary["errors"][0]["code"] == "E_INSUFFICIENT_DATA"


class TestStability:
    def test_logistic_csv_fixture(self, tmp_path):
        series = TimeSeries(logistic_map(2000, x0=0.37), 1.0, channel_names=("x",))
        csv_path = tmp_path / "logistic.csv"
        write_full_precision_csv(csv_path, series)
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[stability]
signal_csv = "{csv_path}"
delay_s = 1.0
dimension = 2
short_window = [0.0, 4.0]
long_window = [6.0, 8.0]
max_horizon_s = 8.0
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "stability") == 0
        lam = summary_of(out)["metrics"]["logistic"]["lambda_short_per_s"]
        assert lam == pytest.approx(np.log(2.0), rel=0.15)

    def test_periodic_and_affine_fixtures(self, tmp_path):
        base = sine_wave(0.927051, 60.0, 60.0)
        lams = {}
        for name, signal in (("periodic", base), ("affine", 2.5 * base + 1.0)):
            csv_path = tmp_path / f"{name}.csv"
            write_full_precision_csv(csv_path, TimeSeries(signal, 60.0,
                                                          channel_names=("x",)))
            cfg = write_toml(tmp_path / f"{name}.toml", f"""
[stability]
signal_csv = "{csv_path}"
""")
            out = tmp_path / f"out_{name}"
            assert run_cli("--config", cfg, "--out-dir", out, "stability") == 0
            lams[name] = summary_of(out)["metrics"][name]["lambda_short_per_s"]
        assert abs(lams["periodic"]) < 0.02
        assert lams["affine"] == pytest.approx(lams["periodic"], abs=1e-6)

    def test_divergence_csv_shape(self, tmp_path):
        csv_path = tmp_path / "sine.csv"
        write_full_precision_csv(csv_path, TimeSeries(sine_wave(0.927051, 60.0, 30.0),
                                                      60.0, channel_names=("x",)))
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[stability]
signal_csv = "{csv_path}"
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "stability") == 0
        with open(out / "sine_divergence.csv", encoding="utf-8") as fh:
            assert fh.readline().strip() == "t,mean_log_div,pair_count"


class TestAnthro:
    def test_cube_perimeter_and_table_stats(self, tmp_path):
        v, t = box_mesh((0.4, 0.4, 0.4))
        mesh_path = tmp_path / "cube.obj"
        write_obj(mesh_path, v, t)
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[anthro]
mesh = "{mesh_path}"
waist_height_m = 0.2
slab_bounds_m = [0.1, 0.3]
measured = [85, 89, 90, 84]
estimated = [86, 102, 100, 96]
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "anthro") == 0
        metrics = summary_of(out)["metrics"]
        assert metrics["waist_circumference_m"] == pytest.approx(1.6, abs=1e-9)
        assert metrics["trunk_slab_volume_m3"] == pytest.approx(0.032, rel=1e-9)
        stats = metrics["error_stats_pct"]
        assert round(stats["mean"]) == 10
        assert round(stats["min"]) == 1 and round(stats["max"]) == 15

    def test_icosphere_volume(self, tmp_path):
        v, t = icosphere(0.2, 4)
        mesh_path = tmp_path / "sphere.obj"
        write_obj(mesh_path, v, t)
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[anthro]
mesh = "{mesh_path}"
waist_height_frac = 0.5
slab_fractions = [0.0, 1.0]
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "anthro") == 0
        vol = summary_of(out)["metrics"]["total_volume_m3"]
        assert vol == pytest.approx(4 / 3 * np.pi * 0.2 ** 3, rel=0.005)


class TestTrack:
    def test_translation_fixture(self, tmp_path, write_patch_sequence):
        frames_dir, template = write_patch_sequence(
            [(5 + 3 * i, 12) for i in range(20)])
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[track]
frames_dir = "{frames_dir}"
template = "{template}"
[filter]
order = 5
cutoff_hz = 0.2
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "track") == 0
        rows = np.loadtxt(out / "track_positions.csv", delimiter=",", skiprows=1)
        assert np.array_equal(rows[:, 1], 5 + 3 * np.arange(20))
        assert summary_of(out)["metrics"]["n_invalid"] == 0

    def test_occlusion_flagged(self, tmp_path, write_patch_sequence):
        frames_dir, template = write_patch_sequence(
            [(4 + 2 * i, 10) for i in range(25)], occluded=[12])
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[track]
frames_dir = "{frames_dir}"
template = "{template}"
[filter]
order = 5
cutoff_hz = 0.2
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "track") == 0
        summary = summary_of(out)
        assert summary["metrics"]["n_invalid"] == 1
        assert any(w["code"] == "W_FRAMES_BELOW_THRESHOLD" for w in summary["warnings"])

    def test_static_zero_acceleration(self, tmp_path, write_patch_sequence):
        frames_dir, template = write_patch_sequence([(20, 15)] * 30)
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[track]
frames_dir = "{frames_dir}"
template = "{template}"
[filter]
order = 5
cutoff_hz = 0.2
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "track") == 0
        _, _, acc = read_series_csv(out / "track_acceleration.csv")
        assert np.allclose(acc, 0.0, atol=1e-6)
        assert any(w["code"] == "W_ARBITRARY_UNITS"
                   for w in summary_of(out)["warnings"])


class TestMsk:
    def test_single_fascicle_static(self, tmp_path):
        model = {
            "name": "toy",
            "sigma_max_pa": 1.0e6,
            "reference_subject": {"sex": "male", "age_years": 35.0,
                                  "height_m": 1.75, "weight_kg": 75.0},
            "levels": [{"name": "L4L5", "height_m": 0.08, "rotation_share": 1.0}],
            "segments": [],
            "fascicles": [{"name": "ext", "levels": ["L4L5"],
                           "moment_arm_m": [0.05], "pcsa_m2": 2.5e-3}],
        }
        model_path = tmp_path / "toy.json"
        model_path.write_text(json.dumps(model))
        lever = 100.0 / (10.0 * 9.81)  # 10 kg producing exactly 100 N*m
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[msk]
model_file = "{model_path}"
flexion_deg = 0.0
load_mass_kg = 10.0
load_position = [{lever}, 0.3]
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "msk") == 0
        metrics = summary_of(out)["metrics"]
        assert metrics["forces_n"]["ext"] == pytest.approx(2000.0, abs=1e-6)
        assert metrics["converged"]

    def test_dynamic_drive_from_csv(self, tmp_path):
        t = np.arange(100) / 50.0
        flex = 45.0 * np.cos(np.pi * t / 4.0) ** 2
        drive = tmp_path / "drive.csv"
        body = np.column_stack([t, flex, np.full_like(t, 0.32), np.full_like(t, 0.35)])
        np.savetxt(drive, body, delimiter=",", comments="",
                   header="t,flexion,load_x,load_z", fmt="%.9g")
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[msk]
flexion_csv = "{drive}"
load_mass_kg = 40.0
sigma_max_pa = 5.0e6
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "msk") == 0
        metrics = summary_of(out)["metrics"]
        assert metrics["n_failed"] == 0
        assert metrics["peak_compression_n"] > 2000.0

    def test_snatch_band_via_cli(self, tmp_path):
        cfg = write_toml(tmp_path / "cfg.toml", """
[msk]
flexion_deg = 70.0
load_mass_kg = 75.0
load_position = [0.35, 0.30]
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "msk",
                       "--sigma-max-pa", "5e6") == 0
        comp = summary_of(out)["metrics"]["compression_n"]
        assert 5000.0 <= comp <= 15000.0


class TestLoads:
    def test_fit_small_grid(self, tmp_path):
        cfg = write_toml(tmp_path / "cfg.toml", """
[loads]
degree = 2
[loads.grid]
flexion_deg = [0.0, 30.0, 60.0]
lever_norm = [0.0, 0.5, 1.0]
asymmetry_deg = [0.0, 10.0, 20.0]
load_mass_kg = [0.0, 10.0, 20.0]
height_m = [1.65, 1.75, 1.85]
weight_kg = [60.0, 75.0, 90.0]
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "loads", "fit") == 0
        metrics = summary_of(out)["metrics"]
        assert metrics["n_samples"] == 729
        assert metrics["fit"]["compression"]["r_squared"] > 0.9
        assert (out / "loads_model.json").exists()

    def test_eval_on_bow(self, tmp_path, write_bow_fixture):
        pose = write_bow_fixture()
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[pose]
keypoints = "{pose}"
[subject]
sex = "male"
age_years = 30.0
height_m = 1.76
weight_kg = 72.0
[loads]
load_mass_kg = 10.0
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "loads", "eval") == 0
        stats = summary_of(out)["metrics"]["bow"]
        assert stats["peak_compression_n"] > stats["mean_compression_n"] > 0
        names, _, _ = read_series_csv(out / "bow_loads.csv")
        assert names == ["compression_n", "shear_n"]


class TestCompare:
    def write_pair(self, tmp_path, a, b):
        ref, est = tmp_path / "ref.csv", tmp_path / "est.csv"
        write_full_precision_csv(ref, TimeSeries(a, 30.0, channel_names=("flexion",)))
        write_full_precision_csv(est, TimeSeries(b, 30.0, channel_names=("flexion",)))
        return ref, est

    def run_compare(self, tmp_path, ref, est):
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[compare]
reference_csv = "{ref}"
estimated_csv = "{est}"
""")
        out = tmp_path / "out_cmp"
        assert run_cli("--config", cfg, "--out-dir", out, "compare") == 0
        return summary_of(out)["metrics"]["flexion"]

    def test_identical_series(self, tmp_path):
        a = 30.0 + 10.0 * np.sin(np.arange(100) / 7.0)
        stats = self.run_compare(tmp_path, *self.write_pair(tmp_path, a, a.copy()))
        assert stats["correlation"] == pytest.approx(1.0, abs=1e-12)
        assert stats["abs_error_mean"] == 0.0
        assert stats["abs_error_sd"] == 0.0

    def test_constant_offset(self, tmp_path):
        a = 30.0 + 10.0 * np.sin(np.arange(100) / 7.0)
        stats = self.run_compare(tmp_path, *self.write_pair(tmp_path, a, a + 5.0))
        assert stats["correlation"] == pytest.approx(1.0, abs=1e-12)
        assert stats["abs_error_mean"] == pytest.approx(5.0, abs=1e-9)
        assert stats["abs_error_sd"] == pytest.approx(0.0, abs=1e-9)

    def test_degraded_estimates_match_hand_formulas(self, tmp_path):
        rng = np.random.default_rng(13)
        a = 30.0 + 12.0 * np.sin(np.arange(200) / 9.0)
        b = 0.8 * a + 4.0 + rng.normal(0, 2.0, size=a.shape)
        # direct formula recomputation, independent of the implementation
        r_hand = (np.mean(a * b) - a.mean() * b.mean()) / (a.std() * b.std())
        err = np.abs(b - a)
        stats = self.run_compare(tmp_path, *self.write_pair(tmp_path, a, b))
        assert stats["correlation"] == pytest.approx(r_hand, abs=1e-9)
        assert stats["abs_error_mean"] == pytest.approx(err.mean(), abs=1e-9)
        assert stats["abs_error_sd"] == pytest.approx(err.std(), abs=1e-9)


class TestDeterminismAndErrors:
    def test_byte_identical_reruns(self, tmp_path, write_bow_fixture):
        pose = write_bow_fixture()
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[pose]
keypoints = "{pose}"
[kin]
metrics = ["trunk_flexion", "shoulder_to_hand"]
""")
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert run_cli("--config", cfg, "--out-dir", out1, "kin") == 0
        assert run_cli("--config", cfg, "--out-dir", out2, "kin") == 0
        for name in ("bow_trunk_flexion.csv", "bow_shoulder_to_hand.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        s1 = (out1 / "summary.json").read_text().replace(str(out1), "OUT")
        s2 = (out2 / "summary.json").read_text().replace(str(out2), "OUT")
        assert s1 == s2

    def test_missing_config_section_fails_cleanly(self, tmp_path):
        cfg = write_toml(tmp_path / "cfg.toml", "[filter]\norder = 5\n")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "anthro") == 1
        assert summary_of(out)["errors"][0]["code"] == "E_INVALID_CONFIG"

    def test_missing_file_reported(self, tmp_path):
        cfg = write_toml(tmp_path / "cfg.toml", """
[anthro]
mesh = "does_not_exist.obj"
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "anthro") == 1
        assert summary_of(out)["errors"][0]["code"] == "E_FILE_NOT_FOUND"

    def test_set_override_wins(self, tmp_path, write_patch_sequence):
        frames_dir, template = write_patch_sequence([(5, 5)] * 8)
        cfg = write_toml(tmp_path / "cfg.toml", f"""
[track]
frames_dir = "{frames_dir}"
template = "{template}"
threshold = 0.8
""")
        out = tmp_path / "out"
        assert run_cli("--config", cfg, "--out-dir", out, "track",
                       "--threshold", "1.1") == 1  # impossible threshold
        assert summary_of(out)["errors"][0]["code"] == "E_TRACKING_LOST"
