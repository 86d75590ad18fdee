"""Grayscale template tracking by zero-normalized cross-correlation.

Matching is exhaustive over integer-pixel placements (no subpixel
refinement; the downstream low-pass filter absorbs quantization noise).
Scores are intensity-affine invariant: each window and the template are
mean-subtracted and variance-normalized, so gain and offset changes in the
frame leave the score unchanged. Search windows with zero variance score 0.
Ties resolve to the smallest (y, x) placement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    InsufficientDataError,
    InvalidInputError,
    ParseError,
    TrackingLostError,
)
from .signals import FilterSpec, TimeSeries, butterworth_zero_lag, central_diff

VARIANCE_EPS = 1e-12


@dataclass(frozen=True)
class GrayFrame:
    pixels: np.ndarray  # (height, width) intensities in [0, 1]
    frame_index: int = 0

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or px.size == 0:
            raise InvalidInputError("frame pixels must be a nonempty 2-D array")
        if not np.all(np.isfinite(px)):
            raise InvalidInputError("frame contains non-finite intensities")
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Template:
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or px.size == 0:
            raise InvalidInputError("template must be a nonempty 2-D array")
        if float(np.var(px)) <= VARIANCE_EPS:
            raise InvalidInputError("template has zero intensity variance; NCC undefined")
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class TrackResult:
    frame_index: int
    x: int
    y: int
    score: float
    valid: bool


def ncc_score_map(frame: GrayFrame, template: Template) -> np.ndarray:
    """Zero-normalized cross-correlation score for every placement;
    shape (H - h + 1, W - w + 1)."""
    f = frame.pixels
    t = template.pixels
    h, w = t.shape
    if h > frame.height or w > frame.width:
        raise InvalidInputError(
            f"template {t.shape} larger than frame {f.shape}")
    t0 = t - t.mean()
    t_norm = np.sqrt(np.sum(t0 * t0))
    windows = sliding_window_view(f, (h, w))
    # sum(W * t0) equals sum((W - mean(W)) * t0) because t0 sums to zero
    num = np.einsum("ijkl,kl->ij", windows, t0)
    wsum = np.einsum("ijkl->ij", windows)
    wsq = np.einsum("ijkl,ijkl->ij", windows, windows)
    wvar = wsq - wsum * wsum / (h * w)
    np.maximum(wvar, 0.0, out=wvar)
    den = np.sqrt(wvar) * t_norm
    scores = np.zeros_like(num)
    ok = den > VARIANCE_EPS
    scores[ok] = num[ok] / den[ok]
    return np.clip(scores, -1.0, 1.0)


def ncc_match(frame: GrayFrame, template: Template,
              search_center: Optional[Tuple[int, int]] = None,
              search_radius: Optional[int] = None) -> Tuple[int, int, float]:
    """Best placement (x, y, score); top-left corner convention.

    With ``search_center``/``search_radius`` the argmax is restricted to
    placements within the radius (Chebyshev) of the center.
    """
    scores = ncc_score_map(frame, template)
    if search_center is not None and search_radius is not None:
        cx, cy = search_center
        ys = slice(max(0, cy - search_radius), min(scores.shape[0], cy + search_radius + 1))
        xs = slice(max(0, cx - search_radius), min(scores.shape[1], cx + search_radius + 1))
        sub = scores[ys, xs]
        flat = np.argmax(sub)  # first occurrence = smallest (y, x)
        y, x = np.unravel_index(flat, sub.shape)
        y += ys.start
        x += xs.start
    else:
        flat = np.argmax(scores)
        y, x = np.unravel_index(flat, scores.shape)
    return int(x), int(y), float(scores[y, x])


def track_sequence(frames: Sequence[GrayFrame], template: Template,
                   threshold: float = 0.8,
                   search_radius: Optional[int] = None,
                   rate_hz: Optional[float] = None
                   ) -> Tuple[List[TrackResult], TimeSeries]:
    """Match the template in every frame and assemble a position series.

    Frames scoring below ``threshold`` are invalid; interior invalid frames
    are linearly interpolated in the position series, boundary invalid
    frames hold the nearest valid position. All-invalid sequences raise.
    The series is in pixels at ``rate_hz`` (1 frame^-1 when unknown).
    """
    if not frames:
        raise InsufficientDataError("no frames to track")
    shape = frames[0].pixels.shape
    if any(f.pixels.shape != shape for f in frames):
        raise InvalidInputError("frames must share one size")

    results: List[TrackResult] = []
    prev_hit: Optional[Tuple[int, int]] = None
    for i, frame in enumerate(frames):
        center = prev_hit if search_radius is not None else None
        x, y, score = ncc_match(frame, template, center, search_radius)
        valid = score >= threshold
        results.append(TrackResult(i, x, y, score, valid))
        if valid:
            prev_hit = (x, y)

    valid_mask = np.array([r.valid for r in results])
    if not valid_mask.any():
        raise TrackingLostError("template not found in any frame",
                                threshold=threshold)
    xy = np.array([[r.x, r.y] for r in results], dtype=float)
    idx = np.arange(len(results))
    for c in range(2):
        xy[:, c] = np.interp(idx, idx[valid_mask], xy[valid_mask, c])
    series = TimeSeries(xy, rate_hz if rate_hz else 1.0, 0.0,
                        channel_names=("x", "y"),
                        units="px" if rate_hz else "px (a.u.)")
    return results, series


def head_acceleration_pipeline(frames: Sequence[GrayFrame], template: Template,
                               filter_spec: FilterSpec,
                               threshold: float = 0.8,
                               search_radius: Optional[int] = None,
                               scale_m_per_px: Optional[float] = None,
                               rate_hz: Optional[float] = None
                               ) -> Tuple[TimeSeries, List[TrackResult]]:
    """Track, differentiate twice, low-pass filter.

    With scale and rate the output is m/s^2; otherwise pixel/frame^2,
    an arbitrary unit.
    """
    results, positions = track_sequence(frames, template, threshold,
                                        search_radius, rate_hz)
    if positions.n_samples < 5:
        raise InsufficientDataError("need at least 5 tracked frames for acceleration")
    if scale_m_per_px is not None:
        positions = positions.with_data(positions.data * scale_m_per_px, units="m")
    accel = butterworth_zero_lag(central_diff(positions, 2), filter_spec)
    units = "m/s^2" if (scale_m_per_px is not None and rate_hz is not None) else "px/frame^2 (a.u.)"
    accel = accel.with_data(accel.data, units=units)
    return accel, results


# --- binary PGM (P5, maxval 255) input for frame sequences ---

def read_pgm(path) -> np.ndarray:
    """8-bit binary PGM to float intensities in [0, 1] (exactly value/255)."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i] not in b"\n":
                i += 1
        elif data[i] in b" \t\r\n":
            i += 1
        else:
            j = i
            while j < len(data) and data[j] not in b" \t\r\n#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise ParseError(f"{path}: not a binary P5 PGM")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise InvalidInputError(f"{path}: only maxval 255 supported, got {maxval}")
    raster = data[i + 1: i + 1 + width * height]
    if len(raster) != width * height:
        raise ParseError(f"{path}: truncated raster")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return img.astype(float) / 255.0


def write_pgm(path, intensities: np.ndarray) -> None:
    img = np.clip(np.asarray(intensities, dtype=float), 0.0, 1.0)
    raw = np.round(img * 255.0).astype(np.uint8)
    h, w = raw.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(raw.tobytes())


def read_frame_dir(directory, pattern: str = "*.pgm") -> List[GrayFrame]:
    """Load a frame sequence; lexicographic filename order is temporal order."""
    import pathlib

    paths = sorted(pathlib.Path(directory).glob(pattern))
    if not paths:
        raise InsufficientDataError(f"no {pattern} files in {directory}")
    return [GrayFrame(read_pgm(p), i) for i, p in enumerate(paths)]
