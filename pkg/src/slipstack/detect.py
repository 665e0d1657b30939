"""Variance-based movement detectors and detection-map export.

Both detectors use population variance (denominator = count) computed
over finite samples only; anything with fewer than two finite samples
gets NaN.  The global detector reduces the full time axis to one map;
the local detector slides a centered, boundary-clipped window through
the stack.  Detection maps export as CSV triples and per-frame PGM.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .model import DetectionMap, FormatError, SlipstackError, Stack


@dataclass(frozen=True)
class DetectorConfig:
    """mode: global (per-pixel over all frames) or local (sliding window).
    threshold in mm² compared strictly; window is (wt, wy, wx), odd dims."""

    mode: str = "global"
    threshold: float = 150.0
    window: tuple[int, int, int] = (5, 5, 5)
    dilate_radius: int = 0

    def __post_init__(self):
        if self.mode not in ("global", "local"):
            raise ValueError(f"unknown detector mode {self.mode!r}")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        w = tuple(int(v) for v in self.window)
        if len(w) != 3 or any(v < 1 or v % 2 == 0 for v in w):
            raise ValueError("window dims must be odd and >= 1")
        object.__setattr__(self, "window", w)
        if self.dilate_radius < 0:
            raise ValueError("dilate_radius must be >= 0")


def variance_global(stack: Stack) -> np.ndarray:
    """Per-pixel population variance over all frames, NaN omitted.
    Pixels with fewer than two finite samples are NaN."""
    if stack.num_frames < 2:
        raise SlipstackError("global variance needs at least 2 frames")
    data = stack.data.astype(np.float64)
    finite = np.isfinite(data)
    count = finite.sum(axis=0)
    # center on the global mean so the sum-of-squares difference is
    # well conditioned for large offsets
    offset = data[finite].mean() if finite.any() else 0.0
    centered = np.where(finite, data - offset, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = centered.sum(axis=0) / count
        var = (centered * centered).sum(axis=0) / count - mean * mean
    var = np.maximum(var, 0.0)
    var[count < 2] = np.nan
    return var


def variance_local(stack: Stack, window=(5, 5, 5)) -> np.ndarray:
    """Population variance inside a centered wt*wy*wx window around every
    voxel, clipped at the stack boundary, NaN omitted."""
    wt, wy, wx = (int(v) for v in window)
    if any(v < 1 or v % 2 == 0 for v in (wt, wy, wx)):
        raise SlipstackError("window dims must be odd and >= 1")
    t, h, w = stack.data.shape
    if wt > t and wy > h and wx > w:
        raise SlipstackError(f"window {(wt, wy, wx)} exceeds the stack in every dim")

    data = stack.data.astype(np.float64)
    finite = np.isfinite(data)
    offset = data[finite].mean() if finite.any() else 0.0
    centered = np.where(finite, data - offset, 0.0)

    # uniform_filter with zero-padding returns window means over the padded
    # volume; multiplying by the window volume recovers plain sums, which
    # makes boundary clipping just a matter of counting finite members
    size = (wt, wy, wx)
    vol = wt * wy * wx
    kw = dict(size=size, mode="constant", cval=0.0)
    count = np.rint(ndimage.uniform_filter(finite.astype(np.float64), **kw) * vol)
    s1 = ndimage.uniform_filter(centered, **kw) * vol
    s2 = ndimage.uniform_filter(centered * centered, **kw) * vol
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = s1 / count
        var = s2 / count - mean * mean
    var = np.maximum(var, 0.0)
    var[count < 2] = np.nan
    return var


def threshold(variance: np.ndarray, tau: float) -> DetectionMap:
    """Bit true iff variance strictly exceeds tau; NaN compares false."""
    if not tau > 0:
        raise SlipstackError("threshold must be positive")
    var = np.asarray(variance)
    if var.ndim == 2:
        var = var[np.newaxis]
    if var.ndim != 3:
        raise SlipstackError("variance must be an H*W map or T*H*W stack")
    with np.errstate(invalid="ignore"):
        bits = var > tau
    return DetectionMap(bits)


def dilate(dmap: DetectionMap, radius: int) -> DetectionMap:
    """Per-frame morphological dilation with a square of side 2*radius+1."""
    if radius < 0:
        raise SlipstackError("dilate radius must be >= 0")
    if radius == 0:
        return dmap
    side = 2 * radius + 1
    structure = np.ones((1, side, side), dtype=bool)
    return DetectionMap(ndimage.binary_dilation(dmap.bits, structure=structure))


# ---------------------------------------------------------------------------
# Export


def write_detections_csv(dmap: DetectionMap, path) -> None:
    """CSV triples t,row,col, one row per detection, index order."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "row", "col"])
        for t, r, c in np.argwhere(dmap.bits):
            writer.writerow([int(t), int(r), int(c)])


def read_detections_csv(path, num_frames: int, height: int, width: int) -> DetectionMap:
    bits = np.zeros((num_frames, height, width), dtype=bool)
    with open(path, "r", newline="") as f:
        rows = list(csv.reader(f))
    rows = [r for r in rows if r]
    if not rows or [c.strip() for c in rows[0]] != ["t", "row", "col"]:
        raise FormatError(f"{path}: header must be 't,row,col'")
    for i, row in enumerate(rows[1:], start=2):
        try:
            t, r, c = (int(v) for v in row)
        except ValueError:
            raise FormatError(f"{path}: row {i}: bad index triple {row}") from None
        if not (0 <= t < num_frames and 0 <= r < height and 0 <= c < width):
            raise FormatError(f"{path}: row {i}: index {(t, r, c)} out of bounds")
        bits[t, r, c] = True
    return DetectionMap(bits)


def write_detection_pgm(dmap: DetectionMap, frame: int, path) -> None:
    """One frame as binary PGM (P5, maxval 255); detections are 255."""
    if not 0 <= frame < dmap.num_frames:
        raise SlipstackError(f"frame {frame} out of range")
    bits = dmap.bits[frame]
    img = np.where(bits, 255, 0).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(img.tobytes())
