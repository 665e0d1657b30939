"""Grid scattered point series into raster stacks.

Cells average the points they contain (NaNs omitted per frame); cells
with no point, and frames where every contained sample is NaN, stay NaN.
The grid is anchored at its south-west corner and row 0 is the
northernmost row.
"""

from __future__ import annotations

import math

import numpy as np

from .model import GridGeo, PointSet, SlipstackError, Stack


def _grid_for(points: PointSet, cell_size: float, bounds) -> tuple[GridGeo, int, int]:
    if bounds is not None:
        x0, y0, x1, y1 = map(float, bounds)
        if not all(map(math.isfinite, (x0, y0, x1, y1))) or x1 <= x0 or y1 <= y0:
            raise SlipstackError(f"bad raster bounds {bounds}")
        width = max(1, round((x1 - x0) / cell_size))
        height = max(1, round((y1 - y0) / cell_size))
        return GridGeo(x0, y0, cell_size), height, width
    east = np.array([p.easting for p in points.points])
    north = np.array([p.northing for p in points.points])
    # bounding box of the points padded by one cell on each side
    x0 = east.min() - cell_size
    y0 = north.min() - cell_size
    width = math.ceil((east.max() - east.min()) / cell_size) + 2
    height = math.ceil((north.max() - north.min()) / cell_size) + 2
    return GridGeo(x0, y0, cell_size), height, width


def cell_of(easting: float, northing: float, geo: GridGeo, height: int, width: int):
    """Map coordinates to (row, col).  Points on the outer north/west edge of a
    cell belong to it; the far south and east grid edges fold into the last
    row and column so the boundary is closed."""
    col = int(math.floor((easting - geo.x_origin) / geo.cell_size))
    north_edge = geo.y_origin + height * geo.cell_size
    row = int(math.floor((north_edge - northing) / geo.cell_size))
    if col == width and easting == geo.x_origin + width * geo.cell_size:
        col = width - 1
    if row == height and northing == geo.y_origin:
        row = height - 1
    if not (0 <= row < height and 0 <= col < width):
        raise SlipstackError(
            f"point ({easting:g}, {northing:g}) falls outside the raster grid"
        )
    return row, col


def rasterize(points: PointSet, cell_size: float, bounds=None) -> Stack:
    """Average point series into a (time, row, col) stack.

    points must be regularized.  bounds, when given, pins the grid to the
    rectangle (x0, y0, x1, y1); otherwise the grid is the padded bounding
    box of the points.
    """
    if cell_size <= 0 or not math.isfinite(cell_size):
        raise SlipstackError("cell_size must be positive")
    if not points.points:
        raise SlipstackError("cannot rasterize an empty point set")
    if not points.regularized:
        raise SlipstackError("rasterize requires a regularized point set")

    geo, height, width = _grid_for(points, cell_size, bounds)
    num_steps = points.time_grid.num_steps

    flat_idx = np.empty(len(points.points), dtype=np.int64)
    for i, p in enumerate(points.points):
        row, col = cell_of(p.easting, p.northing, geo, height, width)
        flat_idx[i] = row * width + col

    values = np.stack([p.values for p in points.points], axis=1)  # (T, P)
    finite = np.isfinite(values)
    n_cells = height * width
    data = np.full((num_steps, n_cells), np.nan, dtype=np.float64)
    for t in range(num_steps):
        f = finite[t]
        if not f.any():
            continue
        sums = np.bincount(flat_idx[f], weights=values[t, f], minlength=n_cells)
        counts = np.bincount(flat_idx[f], minlength=n_cells)
        hit = counts > 0
        data[t, hit] = sums[hit] / counts[hit]
    data = data.reshape(num_steps, height, width)
    return Stack(points.time_grid, geo, data.astype(np.float32))
