"""Fit the shipped trunk-mass regression against the mesh-based oracle.

Builds a deterministic corpus of synthetic standing bodies, measures each
body's weight (closed-mesh volume x uniform density), waist circumference
(plane section at the waist height), and trunk mass (slab between the hip
and shoulder planes x density), then fits

    m_trunk = b0 + b1 * weight_kg + b2 * height_m + b3 * waist_m

by ordinary least squares and writes the coefficients to
src/spinekit/data/trunk_mass_coefficients.json.

Run from the repository root:  python3 scripts/fit_trunk_mass_coefficients.py
"""

import json
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from spinekit.anthro import BodyDensity, TriMesh, mesh_volume, plane_section_perimeter, slab_volume
from spinekit.synth import BODY_TRUNK_FRACTIONS, BODY_WAIST_FRACTION, synthetic_body

HEIGHTS = (1.60, 1.75, 1.90)
GIRTHS = (0.85, 1.00, 1.15)
WAIST_SCALES = (0.90, 1.00, 1.15)


def corpus_rows():
    rho = BodyDensity().rho_kg_m3
    for h in HEIGHTS:
        for g in GIRTHS:
            for w in WAIST_SCALES:
                v, t = synthetic_body(height_m=h, girth=g, waist_scale=w)
                mesh = TriMesh(v, t)
                weight = mesh_volume(mesh) * rho
                waist = plane_section_perimeter(mesh, BODY_WAIST_FRACTION * h)
                lo, hi = BODY_TRUNK_FRACTIONS
                trunk = slab_volume(mesh, lo * h, hi * h) * rho
                yield h, g, w, weight, waist, trunk


def main():
    rows = list(corpus_rows())
    design = np.array([[1.0, weight, h, waist] for h, _, _, weight, waist, _ in rows])
    target = np.array([trunk for *_, trunk in rows])
    beta, *_ = np.linalg.lstsq(design, target, rcond=None)
    pred = design @ beta
    rel = (pred - target) / target
    print(f"corpus size: {len(rows)}")
    print(f"beta: {beta}")
    print(f"max |relative error|: {np.max(np.abs(rel)):.4f}")
    print(f"rms relative error:  {np.sqrt(np.mean(rel ** 2)):.4f}")

    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "spinekit" / "data"
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "beta": [float(b) for b in beta],
        "provenance": "OLS fit on the synthetic standing-body corpus "
                      "(heights 1.60/1.75/1.90 m, girths 0.85/1.00/1.15, "
                      "waist scales 0.90/1.00/1.15) against slab-volume x "
                      "1071 kg/m^3 trunk mass",
    }
    with open(out / "trunk_mass_coefficients.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out / 'trunk_mass_coefficients.json'}")


if __name__ == "__main__":
    main()
