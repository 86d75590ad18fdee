"""Deterministic synthetic inputs: posed skeletons, benchmark signals,
closed meshes, and moving-patch image sequences.

These generators double as demo data for the CLI and as ground-truth
oracles in the test suite; everything here is reproducible from its
arguments alone (no hidden RNG state).
"""

from __future__ import annotations

import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .kinematics import (
    HEAD,
    LELBOW,
    LHIP,
    LSHOULDER,
    LWRIST,
    RELBOW,
    RHIP,
    RSHOULDER,
    RWRIST,
    Landmark,
    PoseFrame,
    PoseSequence,
)


def skeleton_frame(time_s: float,
                   flexion_deg: float = 0.0,
                   hip_height: float = 1.0,
                   trunk_length: float = 0.5,
                   shoulder_halfwidth: float = 0.2,
                   hip_halfwidth: float = 0.15,
                   arm_angle_deg: float = 180.0,
                   upper_arm: float = 0.30,
                   forearm: float = 0.25,
                   hip_rise: float = 0.0,
                   confidence: float = 1.0) -> PoseFrame:
    """One analytically posed frame. Up is +z, forward is +x, left is +y.

    The trunk tilts forward by ``flexion_deg``; arms point at
    ``arm_angle_deg`` from the up axis in the sagittal plane (180 = hanging
    straight down), with a straight elbow.
    """
    th = math.radians(flexion_deg)
    mid_hip = np.array([0.0, 0.0, hip_height + hip_rise])
    trunk_dir = np.array([math.sin(th), 0.0, math.cos(th)])
    mid_shoulder = mid_hip + trunk_length * trunk_dir
    al = math.radians(arm_angle_deg)
    arm_dir = np.array([math.sin(al), 0.0, math.cos(al)])
    lateral = np.array([0.0, 1.0, 0.0])

    def lm(name, pos):
        return Landmark(name, pos, confidence)

    l_sh = mid_shoulder + shoulder_halfwidth * lateral
    r_sh = mid_shoulder - shoulder_halfwidth * lateral
    l_el = l_sh + upper_arm * arm_dir
    r_el = r_sh + upper_arm * arm_dir
    l_wr = l_el + forearm * arm_dir
    r_wr = r_el + forearm * arm_dir
    marks = {
        LHIP: lm(LHIP, mid_hip + hip_halfwidth * lateral),
        RHIP: lm(RHIP, mid_hip - hip_halfwidth * lateral),
        LSHOULDER: lm(LSHOULDER, l_sh),
        RSHOULDER: lm(RSHOULDER, r_sh),
        LELBOW: lm(LELBOW, l_el),
        RELBOW: lm(RELBOW, r_el),
        LWRIST: lm(LWRIST, l_wr),
        RWRIST: lm(RWRIST, r_wr),
        HEAD: lm(HEAD, mid_shoulder + 0.25 * trunk_dir),
    }
    return PoseFrame(time_s, marks)


def bowing_sequence(rate_hz: float = 30.0,
                    duration_s: float = 10.0,
                    mean_flexion_deg: float = 30.0,
                    amplitude_deg: float = 25.0,
                    freq_hz: float = 0.25,
                    **frame_kwargs) -> PoseSequence:
    """Sinusoidal bow: flexion = mean + amplitude * sin(2 pi f t)."""
    n = int(round(rate_hz * duration_s))
    frames = []
    for i in range(n):
        t = i / rate_hz
        flex = mean_flexion_deg + amplitude_deg * math.sin(2 * math.pi * freq_hz * t)
        frames.append(skeleton_frame(t, flexion_deg=flex, **frame_kwargs))
    return PoseSequence(tuple(frames), rate_hz)


def static_sequence(rate_hz: float = 30.0, n_frames: int = 60,
                    **frame_kwargs) -> PoseSequence:
    frames = tuple(skeleton_frame(i / rate_hz, **frame_kwargs) for i in range(n_frames))
    return PoseSequence(frames, rate_hz)


def logistic_map(n: int, r: float = 4.0, x0: float = 0.37, skip: int = 100) -> np.ndarray:
    """Orbit of x -> r x (1 - x), transient discarded."""
    x = x0
    for _ in range(skip):
        x = r * x * (1.0 - x)
    out = np.empty(n)
    for i in range(n):
        out[i] = x
        x = r * x * (1.0 - x)
    return out


def logistic_local_exponent(orbit: np.ndarray, r: float = 4.0) -> float:
    """Mean log absolute derivative of the map along an orbit.

    Independent estimate of the orbit's divergence rate per iteration:
    for r = 4 the exact value is ln 2.
    """
    return float(np.mean(np.log(np.abs(r - 2.0 * r * orbit))))


def sine_wave(freq_hz: float, rate_hz: float, duration_s: float,
              amplitude: float = 1.0, phase: float = 0.0) -> np.ndarray:
    t = np.arange(int(round(rate_hz * duration_s))) / rate_hz
    return amplitude * np.sin(2 * np.pi * freq_hz * t + phase)


# --- closed test meshes (outward orientation, z up) ---

def box_mesh(size=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    """Axis-aligned box as (vertices, triangles), 8 vertices / 12 triangles."""
    sx, sy, sz = size
    ox, oy, oz = origin
    v = np.array([[x, y, z] for z in (oz, oz + sz) for y in (oy, oy + sy)
                  for x in (ox, ox + sx)], dtype=float)
    quads = [
        (0, 2, 3, 1),  # bottom (z = oz), outward -z
        (4, 5, 7, 6),  # top
        (0, 1, 5, 4),  # y = oy
        (2, 6, 7, 3),  # y = oy + sy
        (0, 4, 6, 2),  # x = ox
        (1, 3, 7, 5),  # x = ox + sx
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append((a, b, c))
        tris.append((a, c, d))
    return v, np.array(tris)


def ngon_prism(n_sides: int, circumradius: float, z_lo: float, z_hi: float,
               center=(0.0, 0.0), phase: float = 0.0):
    """Closed regular-polygon prism with fan caps."""
    ang = phase + 2 * np.pi * np.arange(n_sides) / n_sides
    ring = np.column_stack([center[0] + circumradius * np.cos(ang),
                            center[1] + circumradius * np.sin(ang)])
    bottom = np.column_stack([ring, np.full(n_sides, z_lo)])
    top = np.column_stack([ring, np.full(n_sides, z_hi)])
    cb = np.array([[center[0], center[1], z_lo]])
    ct = np.array([[center[0], center[1], z_hi]])
    v = np.vstack([bottom, top, cb, ct])
    ib, it = 2 * n_sides, 2 * n_sides + 1
    tris = []
    for i in range(n_sides):
        j = (i + 1) % n_sides
        tris.append((i, j, n_sides + j))          # side
        tris.append((i, n_sides + j, n_sides + i))
        tris.append((ib, j, i))                   # bottom cap, outward -z
        tris.append((it, n_sides + i, n_sides + j))  # top cap, outward +z
    return v, np.array(tris)


def icosphere(radius: float = 1.0, subdivisions: int = 3, center=(0.0, 0.0, 0.0)):
    """Subdivided icosahedron with vertices on the sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts[0])
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(p) for p in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                p = np.add(verts[a], verts[b]) / 2.0
                p = tuple(p / np.linalg.norm(p))
                verts.append(p)
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.asarray(verts) * radius + np.asarray(center)
    return v, np.array(faces)


def revolution_body(profile, n_sides: int = 64):
    """Closed solid of revolution around z.

    ``profile`` is a sequence of (z, radius) pairs with strictly increasing
    z and positive interior radii; the ends are closed with cone caps.
    """
    profile = [(float(z), float(r)) for z, r in profile]
    ang = 2 * np.pi * np.arange(n_sides) / n_sides
    cos, sin = np.cos(ang), np.sin(ang)
    rings = []
    verts = []
    for z, r in profile:
        base = len(verts)
        verts.extend(np.column_stack([r * cos, r * sin, np.full(n_sides, z)]))
        rings.append(base)
    bottom_apex = len(verts)
    verts.append([0.0, 0.0, profile[0][0] - 1e-4])
    top_apex = len(verts)
    verts.append([0.0, 0.0, profile[-1][0] + 1e-4])
    tris = []
    for r0, r1 in zip(rings[:-1], rings[1:]):
        for i in range(n_sides):
            j = (i + 1) % n_sides
            tris.append((r0 + i, r0 + j, r1 + j))
            tris.append((r0 + i, r1 + j, r1 + i))
    first, last = rings[0], rings[-1]
    for i in range(n_sides):
        j = (i + 1) % n_sides
        tris.append((bottom_apex, first + j, first + i))
        tris.append((top_apex, last + i, last + j))
    return np.asarray(verts), np.array(tris)


# Body profile as (height fraction, base radius in m at 1.75 m height).
# The two legs are merged into a single column; the corpus only needs a
# self-consistent shape family, not anatomical fidelity.
_BODY_PROFILE = (
    (0.00, 0.056), (0.04, 0.069), (0.25, 0.090), (0.48, 0.131),
    (0.54, 0.156), (0.61, 0.131), (0.72, 0.160), (0.80, 0.150),
    (0.85, 0.069), (0.90, 0.100), (0.97, 0.075), (1.00, 0.013),
)
BODY_WAIST_FRACTION = 0.61
BODY_TRUNK_FRACTIONS = (0.50, 0.82)


def synthetic_body(height_m: float = 1.75, girth: float = 1.0,
                   waist_scale: float = 1.0, n_sides: int = 64):
    """Parametric standing body: stretched in height, scaled in girth, with
    an adjustable waist. Returns (vertices, triangles), z up."""
    profile = []
    for frac, r in _BODY_PROFILE:
        radius = r * girth
        if abs(frac - BODY_WAIST_FRACTION) < 1e-9:
            radius *= waist_scale
        profile.append((frac * height_m, radius))
    return revolution_body(profile, n_sides)


def merge_meshes(*meshes):
    """Concatenate (vertices, triangles) pairs into one vertex/index set."""
    verts, tris, offset = [], [], 0
    for v, t in meshes:
        verts.append(v)
        tris.append(np.asarray(t) + offset)
        offset += len(v)
    return np.vstack(verts), np.vstack(tris)


def torso_with_arms(torso_radius: float = 0.15, arm_radius: float = 0.05,
                    arm_offset: float = 0.35, height: float = 1.0, n_sides: int = 48):
    """Torso column flanked by two detached arm columns (T-pose-like cross
    section): a waist-height plane cuts three separate loops."""
    torso = ngon_prism(n_sides, torso_radius, 0.0, height)
    left = ngon_prism(n_sides, arm_radius, 0.0, height, center=(0.0, arm_offset))
    right = ngon_prism(n_sides, arm_radius, 0.0, height, center=(0.0, -arm_offset))
    return merge_meshes(torso, left, right)


# --- grayscale frame sequences for template tracking ---

def textured_patch(height: int = 12, width: int = 12) -> np.ndarray:
    """Deterministic asymmetric texture in [0, 1] with nonzero variance."""
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    return 0.5 + 0.5 * np.sin(1.3 * xx + 0.7 * yy) * np.cos(1.1 * yy - 0.4 * xx)


def patch_frames(positions: Sequence[Tuple[int, int]],
                 frame_shape: Tuple[int, int],
                 patch: np.ndarray,
                 background: float = 0.25,
                 occluded: Sequence[int] = ()):
    """Frames with the patch pasted top-left at integer (x, y) positions.

    Frames listed in ``occluded`` contain only background. Returns a list of
    pixel arrays; wrap them in track.GrayFrame for matching.
    """
    h, w = patch.shape
    fh, fw = frame_shape
    frames = []
    occluded = set(occluded)
    for i, (x, y) in enumerate(positions):
        img = np.full((fh, fw), background)
        if i not in occluded:
            if not (0 <= y <= fh - h and 0 <= x <= fw - w):
                raise ValueError(f"patch at ({x}, {y}) leaves frame {frame_shape}")
            img[y:y + h, x:x + w] = patch
        frames.append(img)
    return frames
