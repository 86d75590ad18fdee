"""Mesh anthropometrics: waist circumference by plane sectioning, segment
volume and mass under uniform density, and the trunk-mass regression.

Geometry notes
--------------
* Sections and slabs are measured along an axis: the mesh's tagged up axis
  by default, or any explicit unit vector (which keeps the operations
  exactly rigid-motion invariant).
* Vertices that land exactly on a cutting plane are nudged +1e-12 m along
  the axis first, so every triangle sees strictly signed distances and the
  degenerate on-plane cases vanish deterministically.
* Slab volume integrates the flux of F = (e . p) e over the clipped
  boundary, where e is a fixed direction orthogonal to the axis
  (divergence theorem with div F = 1). The planar caps are normal to the
  axis, so their flux is zero and they never need to be triangulated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    EmptySectionError,
    InvalidInputError,
    InvalidRangeError,
    MeshParseError,
    MissingInputError,
    NonManifoldSectionError,
    OpenMeshError,
)
from .kinematics import SubjectAnthropometry, axis_vector

MIN_TRIANGLE_AREA = 1e-12  # m^2
PLANE_EPS = 1e-12          # on-plane vertex nudge, m
CHAIN_TOL = 1e-9           # segment endpoint matching, m


@dataclass(frozen=True)
class BodyDensity:
    rho_kg_m3: float = 1071.0

    def __post_init__(self):
        if not (self.rho_kg_m3 > 0):
            raise InvalidInputError(f"density must be positive, got {self.rho_kg_m3}")


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray   # (n, 3) float, meters
    triangles: np.ndarray  # (m, 3) int
    up_axis: str = "+z"
    closed: bool = False
    orientation_sign: float = 1.0

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=int)
        if v.ndim != 2 or v.shape[1] != 3 or not np.all(np.isfinite(v)):
            raise InvalidInputError("vertices must be a finite (n, 3) array")
        if t.ndim != 2 or t.shape[1] != 3:
            raise InvalidInputError("triangles must be an (m, 3) index array")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise InvalidInputError("triangle index out of range")
        areas = 0.5 * np.linalg.norm(
            np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]]), axis=1)
        if np.any(areas < MIN_TRIANGLE_AREA):
            bad = int(np.argmin(areas))
            raise InvalidInputError(
                f"triangle {bad} is degenerate (area {areas[bad]:.3g} m^2)", triangle=bad)
        closed, sign = _check_closed_oriented(t, v)
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "closed", closed)
        object.__setattr__(self, "orientation_sign", sign)

    def up(self) -> np.ndarray:
        return axis_vector(self.up_axis)

    def axis_extent(self, axis: Optional[np.ndarray] = None) -> Tuple[float, float]:
        u = self.up() if axis is None else np.asarray(axis, float)
        coords = self.vertices @ u
        return float(coords.min()), float(coords.max())


def _check_closed_oriented(triangles: np.ndarray, vertices: np.ndarray) -> Tuple[bool, float]:
    """Closed means every directed edge has exactly one reverse partner.
    A repeated directed edge is an orientation inconsistency and is fatal."""
    edges = {}
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(a), int(b))
            if key in edges:
                raise InvalidInputError(
                    f"inconsistent orientation: directed edge {key} appears twice",
                    edge=key)
            edges[key] = True
    closed = all((b, a) in edges for (a, b) in edges)
    sign = 1.0
    if closed and len(triangles):
        # Outwardness is not implied by consistency; calibrate the sign once
        # from the mesh's total signed volume.
        v = vertices
        t = triangles
        signed = np.einsum("ij,ij->i", v[t[:, 0]],
                           np.cross(v[t[:, 1]], v[t[:, 2]])).sum() / 6.0
        sign = 1.0 if signed >= 0 else -1.0
    return closed, sign


def load_obj(path, up_axis: str = "+z") -> TriMesh:
    """Wavefront OBJ reader (v/f records, polygons fan-triangulated)."""
    vertices: List[List[float]] = []
    triangles: List[Tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                try:
                    vertices.append([float(x) for x in parts[1:4]])
                except (ValueError, IndexError) as err:
                    raise MeshParseError(f"{path}:{lineno}: bad vertex ({err})",
                                         line=lineno) from err
                if len(parts) < 4:
                    raise MeshParseError(f"{path}:{lineno}: vertex needs 3 coordinates",
                                         line=lineno)
            elif tag == "f":
                idx = []
                for tok in parts[1:]:
                    try:
                        i = int(tok.split("/")[0])
                    except ValueError as err:
                        raise MeshParseError(f"{path}:{lineno}: bad face index {tok!r}",
                                             line=lineno) from err
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                if len(idx) < 3:
                    raise MeshParseError(f"{path}:{lineno}: face needs >= 3 vertices",
                                         line=lineno)
                for k in range(1, len(idx) - 1):
                    triangles.append((idx[0], idx[k], idx[k + 1]))
            # other records (vn, vt, o, g, s, usemtl...) are ignored
    if not triangles:
        raise MeshParseError(f"{path}: no faces found")
    try:
        return TriMesh(np.array(vertices), np.array(triangles), up_axis)
    except InvalidInputError as err:
        raise InvalidInputError(f"{path}: {err}", **err.context) from err


def _signed_coords(mesh: TriMesh, height: float, axis: Optional[np.ndarray]) -> np.ndarray:
    u = mesh.up() if axis is None else np.asarray(axis, float)
    d = mesh.vertices @ u - height
    on_plane = np.abs(d) < PLANE_EPS
    d[on_plane] = d[on_plane] + PLANE_EPS
    return d


def _plane_basis(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    pick = np.argmin(np.abs(u))
    e1 = np.zeros(3)
    e1[pick] = 1.0
    e1 = e1 - np.dot(e1, u) * u
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    return e1, e2


def plane_section_segments(mesh: TriMesh, height: float,
                           axis: Optional[np.ndarray] = None) -> np.ndarray:
    """Intersection segments (k, 2, 3) of the mesh with the plane orthogonal
    to the axis at the given height."""
    d = _signed_coords(mesh, height, axis)
    v = mesh.vertices
    segments = []
    for tri in mesh.triangles:
        dd = d[tri]
        below = dd < 0
        if below.all() or (~below).all():
            continue
        pts = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            if (dd[a] < 0) != (dd[b] < 0):
                t = dd[a] / (dd[a] - dd[b])
                pts.append(v[tri[a]] + t * (v[tri[b]] - v[tri[a]]))
        if len(pts) == 2:
            segments.append(pts)
    if not segments:
        raise EmptySectionError(f"plane at height {height} does not intersect the mesh")
    return np.asarray(segments)


def _chain_loops(segments: np.ndarray) -> List[np.ndarray]:
    """Chain segments into closed loops by endpoint matching within CHAIN_TOL.

    Endpoints within tolerance of each other are merged into a single node
    (several cut triangles can meet at a nudged on-plane vertex), degenerate
    segments collapse to nothing, and every surviving node must join exactly
    two segments.
    """
    endpoints = segments.reshape(-1, 3)  # endpoints 2*i, 2*i+1 belong to segment i
    tree = cKDTree(endpoints)
    parent = np.arange(len(endpoints))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in tree.query_pairs(CHAIN_TOL):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    node_of = np.array([find(e) for e in range(len(endpoints))])

    adjacency: dict = {}
    edge_nodes = []
    for i in range(len(segments)):
        a, b = node_of[2 * i], node_of[2 * i + 1]
        edge_nodes.append((a, b))
        if a == b:
            continue  # degenerate sliver from an on-plane vertex
        adjacency.setdefault(a, []).append(i)
        adjacency.setdefault(b, []).append(i)
    if not adjacency:
        raise NonManifoldSectionError("section collapsed to degenerate segments")
    for node, incident in adjacency.items():
        if len(incident) != 2:
            raise NonManifoldSectionError(
                f"section node joins {len(incident)} segments; cannot chain loops")

    loops = []
    visited = set()
    for start_node in adjacency:
        if start_node in visited:
            continue
        loop_nodes = [start_node]
        visited.add(start_node)
        prev_edge = None
        node = start_node
        while True:
            edge = next(e for e in adjacency[node] if e != prev_edge)
            a, b = edge_nodes[edge]
            node = b if a == node else a
            prev_edge = edge
            if node == start_node:
                break
            if node in visited:
                raise NonManifoldSectionError("section chaining revisited a node")
            loop_nodes.append(node)
            visited.add(node)
        loops.append(endpoints[np.array(loop_nodes)])
    return loops


def plane_section_perimeter(mesh: TriMesh, height: float,
                            axis: Optional[np.ndarray] = None) -> float:
    """Perimeter of the largest-area closed loop of the plane section.

    Largest enclosed area, not perimeter, selects the torso loop when limbs
    produce additional smaller loops.
    """
    u = mesh.up() if axis is None else np.asarray(axis, float)
    segments = plane_section_segments(mesh, height, axis)
    loops = _chain_loops(segments)
    e1, e2 = _plane_basis(u)
    best_area, best_perim = -1.0, 0.0
    for loop in loops:
        x, y = loop @ e1, loop @ e2
        area = 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        perim = float(np.sum(np.linalg.norm(loop - np.roll(loop, -1, axis=0), axis=1)))
        if area > best_area:
            best_area, best_perim = area, perim
    return best_perim


def _volume_below(mesh: TriMesh, height: float, axis: Optional[np.ndarray]) -> float:
    u = mesh.up() if axis is None else np.asarray(axis, float)
    e1, _ = _plane_basis(u)
    d = _signed_coords(mesh, height, axis)
    v = mesh.vertices

    def flux(p0, p1, p2):
        normal = np.cross(p1 - p0, p2 - p0)
        centroid_x = (p0 @ e1 + p1 @ e1 + p2 @ e1) / 3.0
        return centroid_x * (normal @ e1) / 2.0

    total = 0.0
    for tri in mesh.triangles:
        dd = d[tri]
        below = dd < 0
        if not below.any():
            continue
        pts = [v[i] for i in tri]
        if below.all():
            total += flux(*pts)
            continue
        # Sutherland-Hodgman clip of the triangle against d <= 0
        poly = []
        for a in range(3):
            b = (a + 1) % 3
            if dd[a] < 0:
                poly.append(pts[a])
            if (dd[a] < 0) != (dd[b] < 0):
                t = dd[a] / (dd[a] - dd[b])
                poly.append(pts[a] + t * (pts[b] - pts[a]))
        for k in range(1, len(poly) - 1):
            total += flux(poly[0], poly[k], poly[k + 1])
    return mesh.orientation_sign * total


def slab_volume(mesh: TriMesh, z_lo: float, z_hi: float,
                axis: Optional[np.ndarray] = None) -> float:
    """Volume of the mesh interior between two cutting planes."""
    if not mesh.closed:
        raise OpenMeshError("slab volume requires a closed mesh")
    if not (z_lo < z_hi):
        raise InvalidRangeError(f"invalid slab range [{z_lo}, {z_hi}]")
    vol = _volume_below(mesh, z_hi, axis) - _volume_below(mesh, z_lo, axis)
    return max(vol, 0.0)


def mesh_volume(mesh: TriMesh) -> float:
    if not mesh.closed:
        raise OpenMeshError("volume requires a closed mesh")
    lo, hi = mesh.axis_extent()
    return slab_volume(mesh, lo - 1.0, hi + 1.0)


def segment_mass(volume_m3: float, density: BodyDensity = BodyDensity()) -> float:
    """Mass of a body segment under uniform density."""
    if volume_m3 < 0:
        raise InvalidInputError(f"volume must be nonnegative, got {volume_m3}")
    return density.rho_kg_m3 * volume_m3


@dataclass(frozen=True)
class TrunkMassRegression:
    """m_trunk = b0 + b1 * weight_kg + b2 * height_m + b3 * waist_m."""

    beta: Tuple[float, float, float, float]
    provenance: str = ""

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        if len(beta) != 4 or not all(np.isfinite(beta)):
            raise InvalidInputError("regression needs 4 finite coefficients")
        object.__setattr__(self, "beta", beta)

    @staticmethod
    def from_json(path) -> "TrunkMassRegression":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return TrunkMassRegression(tuple(obj["beta"]), obj.get("provenance", ""))


@dataclass(frozen=True)
class TrunkMassEstimate:
    mass_kg: float
    out_of_domain: bool


def trunk_mass_regression_eval(reg: TrunkMassRegression,
                               subject: SubjectAnthropometry) -> TrunkMassEstimate:
    """Evaluate the linear trunk-mass form; non-positive predictions are
    returned but flagged out of domain."""
    if subject.waist_circumference_m is None:
        raise MissingInputError("subject waist circumference is required")
    b0, b1, b2, b3 = reg.beta
    mass = b0 + b1 * subject.weight_kg + b2 * subject.height_m \
        + b3 * subject.waist_circumference_m
    return TrunkMassEstimate(mass, out_of_domain=not (mass > 0))


@dataclass(frozen=True)
class ErrorStats:
    mean_pct: float
    min_pct: float
    max_pct: float
    per_pair_pct: Tuple[float, ...]


def estimate_error_stats(measured: Sequence[float], estimated: Sequence[float]) -> ErrorStats:
    """Per-pair percent difference (estimated - measured) / measured,
    with mean and range."""
    m = np.asarray(measured, dtype=float)
    e = np.asarray(estimated, dtype=float)
    if m.shape != e.shape or m.ndim != 1 or len(m) == 0:
        raise InvalidInputError("measured and estimated must be equal-length nonempty lists")
    if np.any(m == 0):
        raise InvalidInputError("measured values must be nonzero")
    pct = (e - m) / m * 100.0
    return ErrorStats(float(np.mean(pct)), float(np.min(pct)), float(np.max(pct)),
                      tuple(pct))
