"""Fit the shipped L4-L5 load regression against the spine solver.

Samples the solver over a six-way grid (flexion, lever arm, asymmetry,
load mass, stature, body weight), fits the cubic polynomial model, checks
it on held-out midpoints, and writes src/spinekit/data/loads_model.json.

Run from the repository root:  python3 scripts/fit_loads_regression.py
"""

import pathlib
import sys
import time

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from spinekit.loads import (
    OracleConfig,
    SampleGrid,
    eval_loads,
    fit_regression,
    generate_training_samples,
)
from spinekit.msk import load_model_json

TRAIN_GRID = SampleGrid(
    flexion_deg=(0.0, 12.0, 24.0, 36.0, 48.0, 60.0),
    lever_norm=(0.0, 0.33, 0.66, 1.0),
    asymmetry_deg=(0.0, 7.0, 14.0, 20.0),
    load_mass_kg=(0.0, 5.0, 10.0, 15.0, 20.0),
    height_m=(1.65, 1.72, 1.79, 1.86),
    weight_kg=(60.0, 70.0, 80.0, 90.0),
)
HELD_OUT_GRID = SampleGrid(
    flexion_deg=(10.0, 30.0, 50.0),
    lever_norm=(0.2, 0.8),
    asymmetry_deg=(3.0, 17.0),
    load_mass_kg=(4.0, 17.0),
    height_m=(1.69, 1.82),
    weight_kg=(65.0, 85.0),
)
DEGREE = 3


def main():
    root = pathlib.Path(__file__).resolve().parents[1]
    model = load_model_json(root / "src" / "spinekit" / "data" / "spine_model.json")
    config = OracleConfig()

    t0 = time.time()
    samples = generate_training_samples(model, TRAIN_GRID, config=config)
    print(f"{len(samples)} training samples in {time.time() - t0:.1f}s")
    reg = fit_regression(
        samples, degree=DEGREE,
        provenance=f"degree-{DEGREE} OLS on the {model.name} static solver; " + config.describe())
    for name, stats in reg.fit_stats.items():
        print(f"train {name}: R^2={stats.r_squared:.4f} RMS={stats.rms:.1f} N")

    held = generate_training_samples(model, HELD_OUT_GRID, config=config)
    pred = np.array([[eval_loads(reg, i).compression_n, eval_loads(reg, i).shear_n]
                     for i, _ in held])
    true = np.array([t for _, t in held])
    for j, name in enumerate(("compression", "shear")):
        ss_res = np.sum((true[:, j] - pred[:, j]) ** 2)
        ss_tot = np.sum((true[:, j] - true[:, j].mean()) ** 2)
        rel = np.sqrt(np.mean((true[:, j] - pred[:, j]) ** 2) / np.mean(true[:, j] ** 2))
        print(f"held-out {name}: R^2={1 - ss_res / ss_tot:.4f} relative RMS={rel:.3f}")

    out = root / "src" / "spinekit" / "data" / "loads_model.json"
    reg.to_json(out)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
