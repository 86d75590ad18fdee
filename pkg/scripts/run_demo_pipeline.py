"""Generate synthetic demo inputs and run every subcommand on them.

Creates a working directory (default ./demo) containing a sinusoidal
lifting keypoint sequence, a body scan mesh, a tracking frame sequence,
and a snatch-style drive table, then runs kin, stability, anthro, track,
msk (static and dynamic), loads eval, and compare, leaving reports under
demo/out_<command>.

Run from the repository root:  python3 scripts/run_demo_pipeline.py [demo_dir]
"""

import json
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from spinekit.cli import main as cli_main
from spinekit.synth import (
    patch_frames,
    skeleton_frame,
    synthetic_body,
    textured_patch,
)
from spinekit.track import write_pgm


def write_pose(path, n=1800, rate=30.0):
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            t = i / rate
            flex = 30.0 + 22.0 * np.sin(2 * np.pi * 0.25 * t)
            frame = skeleton_frame(t, flexion_deg=flex)
            rec = {"t": t, "landmarks": {
                name: {"p": [float(v) for v in lm.position], "c": lm.confidence}
                for name, lm in frame.landmarks.items()}}
            fh.write(json.dumps(rec) + "\n")


def write_body_obj(path):
    v, t = synthetic_body(height_m=1.76, girth=1.02)
    with open(path, "w", encoding="utf-8") as fh:
        for p in v:
            fh.write(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        for a, b, c in t + 1:
            fh.write(f"f {a} {b} {c}\n")


def write_frames(frame_dir, template_path):
    frame_dir.mkdir(parents=True, exist_ok=True)
    patch = np.round(textured_patch(14, 14) * 255) / 255.0
    t = np.arange(120) / 60.0
    ys = np.round(40.0 * np.sin(2 * np.pi * 0.8 * t)).astype(int) + 50
    for i, px in enumerate(patch_frames([(12, int(y)) for y in ys], (120, 48), patch)):
        write_pgm(frame_dir / f"frame_{i:04d}.pgm", px)
    write_pgm(template_path, patch)


def write_drive_csv(path, rate=50.0, duration=2.0):
    t = np.arange(int(rate * duration)) / rate
    flex = 45.0 * np.cos(np.pi * t / (2 * duration)) ** 2
    rise = 0.25 * (1 - np.cos(np.pi * t / duration)) / 2
    body = np.column_stack([t, flex, rise,
                            np.full_like(t, 0.32), np.full_like(t, 0.35)])
    np.savetxt(path, body, delimiter=",", comments="",
               header="t,flexion,hip_rise,load_x,load_z", fmt="%.9g")


def main():
    demo = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "demo").resolve()
    demo.mkdir(parents=True, exist_ok=True)
    pose = demo / "lift.jsonl"
    mesh = demo / "body.obj"
    frames = demo / "frames"
    template = demo / "template.pgm"
    drive = demo / "snatch_drive.csv"
    write_pose(pose)
    write_body_obj(mesh)
    write_frames(frames, template)
    write_drive_csv(drive)

    config = demo / "demo.toml"
    config.write_text(f"""
[pose]
keypoints = "{pose}"

[filter]
order = 5
cutoff_hz = 1.5

[kin]
metrics = ["trunk_flexion", "shoulder_to_hand", "hip_rise"]

[stability]
metric = "trunk_flexion"
delay_s = 0.6
dimension = 2

[anthro]
mesh = "{mesh}"
waist_height_frac = 0.61
slab_fractions = [0.50, 0.82]

[subject]
sex = "male"
age_years = 31.0
height_m = 1.76
weight_kg = 72.0

[track]
frames_dir = "{frames}"
template = "{template}"
rate_hz = 60.0
threshold = 0.8

[msk]
flexion_csv = "{drive}"
load_mass_kg = 40.0
sigma_max_pa = 5.0e6

[loads]
load_mass_kg = 10.0

[compare]
reference_csv = "{demo / 'out_kin' / 'lift_trunk_flexion.csv'}"
estimated_csv = "{demo / 'out_kin' / 'lift_trunk_flexion.csv'}"
""", encoding="utf-8")

    commands = [
        ["kin"], ["stability"], ["anthro"], ["track"], ["msk"],
        ["loads", "eval"], ["compare"],
    ]
    for cmd in commands:
        out = demo / ("out_" + "_".join(cmd))
        rc = cli_main(["--config", str(config), "--out-dir", str(out), *cmd])
        summary = json.loads((out / "summary.json").read_text())
        print(f"{' '.join(cmd):12s} -> exit {rc}, outputs: "
              f"{[pathlib.Path(p).name for p in summary['outputs']]}")
        if rc != 0:
            print(json.dumps(summary["errors"], indent=2))
            return rc
    print(f"demo reports under {demo}/out_*")
    return 0


if __name__ == "__main__":
    sys.exit(main())
