"""Fill temporal gaps and despike point series and raster stacks.

Interpolation is linear between the neighbouring finite samples; before
the first and after the last finite sample the series is extended with
that sample's value.  Despiking is a short median filter that omits NaNs
and preserves the sparsity pattern: a voxel that was NaN stays NaN.
"""

from __future__ import annotations

import numpy as np

from .model import PointSeries, PointSet, SlipstackError, Stack

MEDIAN_MODES = ("off", "temporal3", "spatial3x3")


def interp_time_linear(values: np.ndarray) -> np.ndarray:
    """Fill NaNs of a 1-D series by linear interpolation in slot index."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim != 1:
        raise ValueError("series must be 1-D")
    finite = np.isfinite(vals)
    if not finite.any():
        raise SlipstackError("cannot interpolate an all-NaN series")
    if finite.all():
        return vals.copy()
    idx = np.arange(vals.size)
    # np.interp holds the edge values constant outside the known range
    out = vals.copy()
    out[~finite] = np.interp(idx[~finite], idx[finite], vals[finite])
    return out


def interp_missing(points: PointSet) -> PointSet:
    """Interpolate every point of a regularized set.  The result is dense in
    time, so every slot counts as covered afterwards."""
    if not points.regularized:
        raise SlipstackError("interpolation requires a regularized point set")
    out = []
    for p in points.points:
        try:
            filled = interp_time_linear(p.values)
        except SlipstackError as e:
            raise SlipstackError(f"point {p.id}: {e}") from None
        out.append(PointSeries(p.id, p.easting, p.northing, filled))
    slots = np.arange(points.time_grid.num_steps)
    return PointSet(points.time_grid, slots, tuple(out))


def _median_stacked(layers: list[np.ndarray]) -> np.ndarray:
    # nanmedian over shifted copies; all-NaN columns masked explicitly so
    # numpy does not warn about them
    stacked = np.stack(layers, axis=0)
    mask = np.isnan(stacked).all(axis=0)
    stacked[0][mask] = 0.0
    med = np.nanmedian(stacked, axis=0)
    med[mask] = np.nan
    return med


def _median3_time(data: np.ndarray) -> np.ndarray:
    nanpad = np.full_like(data[:1], np.nan)
    prev = np.concatenate([nanpad, data[:-1]], axis=0)
    nxt = np.concatenate([data[1:], nanpad], axis=0)
    return _median_stacked([prev, data, nxt])


def _median3x3_space(data: np.ndarray) -> np.ndarray:
    layers = []
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            shifted = np.full_like(data, np.nan)
            src_y = slice(max(0, -dy), data.shape[1] - max(0, dy))
            dst_y = slice(max(0, dy), data.shape[1] - max(0, -dy))
            src_x = slice(max(0, -dx), data.shape[2] - max(0, dx))
            dst_x = slice(max(0, dx), data.shape[2] - max(0, -dx))
            shifted[:, dst_y, dst_x] = data[:, src_y, src_x]
            layers.append(shifted)
    return _median_stacked(layers)


def median_denoise(obj, mode: str = "temporal3"):
    """Despike a PointSet or Stack.

    temporal3: median over the sample and its two temporal neighbours
    (window clipped at the ends).  spatial3x3: per-frame median over the
    3x3 neighbourhood, stacks only.  NaNs are omitted from each window;
    an even count yields the mean of the two middle values.  Original
    NaN voxels remain NaN.
    """
    if mode not in MEDIAN_MODES:
        raise ValueError(f"unknown median mode {mode!r}")
    if mode == "off":
        return obj

    if isinstance(obj, PointSet):
        if mode == "spatial3x3":
            raise SlipstackError("spatial3x3 median requires a raster stack")
        out = []
        for p in obj.points:
            med = _median3_time(p.values[:, None, None])[:, 0, 0]
            med[np.isnan(p.values)] = np.nan
            out.append(PointSeries(p.id, p.easting, p.northing, med))
        return PointSet(obj.time_grid, obj.acquisition_slots, tuple(out))

    if isinstance(obj, Stack):
        data = obj.data.astype(np.float64)
        med = _median3_time(data) if mode == "temporal3" else _median3x3_space(data)
        med[np.isnan(data)] = np.nan
        return Stack(obj.time_grid, obj.geo, med.astype(np.float32))

    raise TypeError(f"cannot despike {type(obj).__name__}")
