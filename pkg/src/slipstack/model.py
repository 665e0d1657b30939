"""Core data types and file formats for displacement time series.

Two domains are modelled: scattered measurement points (each carrying a
millimetre displacement series on a shared time grid) and dense raster
stacks (time, row, col) of the same quantity.  Stacks travel between
tools as DSTK files, points as dated CSV.  All containers are immutable
after construction; operations return new objects.

Units: millimetres for displacement, metres for coordinates, days for
time steps.  Missing samples are NaN in both domains.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import struct
from dataclasses import dataclass, field

import numpy as np

# Displacements beyond this magnitude (mm) indicate unit errors upstream.
VALUE_LIMIT_MM = 1.0e4

_EPOCH_1970 = dt.date(1970, 1, 1)

# DSTK layout, little endian:
#   magic 'DSTK' | version u16 | reserved u16 | T,H,W u32 |
#   x_origin,y_origin,cell_size f64 | epoch days-since-1970 i32 |
#   step_days i32 | payload T*H*W f32 row-major
_DSTK_HEADER = struct.Struct("<4sHHIIIdddii")
_DSTK_MAGIC = b"DSTK"
_DSTK_VERSION = 1
_QUIET_NAN_BITS = np.uint32(0x7FC00000)
_MAX_VOXELS = 2**31


class SlipstackError(Exception):
    """Base class for data and format errors raised by this package."""


class FormatError(SlipstackError):
    """Malformed or inconsistent file content."""


class BackendError(SlipstackError):
    """External inpainting backend failed or returned bad output."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Regular acquisition calendar: epoch date plus fixed step in days."""

    epoch: dt.date
    num_steps: int
    step_days: int = 6

    def __post_init__(self):
        if not isinstance(self.epoch, dt.date):
            raise ValueError("epoch must be a datetime.date")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if self.step_days < 1:
            raise ValueError("step_days must be >= 1")

    def date_of(self, slot: int) -> dt.date:
        if not 0 <= slot < self.num_steps:
            raise ValueError(f"slot {slot} outside grid of {self.num_steps} steps")
        return self.epoch + dt.timedelta(days=slot * self.step_days)

    def slot_of(self, date: dt.date) -> int:
        """Snap a date to the nearest slot; error if it falls off the grid."""
        offset = (date - self.epoch).days / self.step_days
        slot = round(offset)
        if slot < 0 or slot >= self.num_steps:
            raise SlipstackError(
                f"date {date.isoformat()} snaps to slot {slot}, "
                f"outside grid of {self.num_steps} steps"
            )
        return slot

    @property
    def dates(self) -> list[dt.date]:
        return [self.date_of(s) for s in range(self.num_steps)]


@dataclass(frozen=True)
class GridGeo:
    """Raster georeference: south-west corner of the grid and cell size (m).

    Row 0 is the northernmost row, so the northing of a cell centre is
    y_origin + (height - row - 0.5) * cell_size.
    """

    x_origin: float
    y_origin: float
    cell_size: float

    def __post_init__(self):
        for name in ("x_origin", "y_origin", "cell_size"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")


@dataclass(frozen=True)
class PointSeries:
    """One measurement point: id, map coordinates (m), displacement series (mm)."""

    id: str
    easting: float
    northing: float
    values: np.ndarray

    def __post_init__(self):
        if not self.id:
            raise ValueError("point id must be non-empty")
        if not (math.isfinite(self.easting) and math.isfinite(self.northing)):
            raise ValueError(f"point {self.id}: coordinates must be finite")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError(f"point {self.id}: values must be a non-empty 1-D array")
        finite = vals[np.isfinite(vals)]
        if finite.size and np.abs(finite).max() > VALUE_LIMIT_MM:
            raise ValueError(
                f"point {self.id}: displacement exceeds {VALUE_LIMIT_MM:g} mm"
            )
        object.__setattr__(self, "values", _readonly(vals))

    @property
    def missing_fraction(self) -> float:
        return float(np.isnan(self.values).mean())


@dataclass(frozen=True)
class PointSet:
    """Points sharing one time grid.

    acquisition_slots lists the grid slots with real acquisitions, in
    increasing order.  Series are either unregularized (one value per
    acquisition, length == len(acquisition_slots)) or regularized (one
    value per grid slot, NaN outside acquisition_slots).
    """

    time_grid: TimeGrid
    acquisition_slots: np.ndarray
    points: tuple[PointSeries, ...] = field(default_factory=tuple)

    def __post_init__(self):
        slots = np.asarray(self.acquisition_slots, dtype=np.int64)
        if slots.ndim != 1 or slots.size == 0:
            raise ValueError("acquisition_slots must be a non-empty 1-D array")
        if slots.min() < 0 or slots.max() >= self.time_grid.num_steps:
            raise ValueError("acquisition slot outside time grid")
        if not np.all(np.diff(slots) > 0):
            raise ValueError("acquisition_slots must be strictly increasing")
        object.__setattr__(self, "acquisition_slots", _readonly(slots))
        object.__setattr__(self, "points", tuple(self.points))

        n_acq = slots.size
        n_grid = self.time_grid.num_steps
        seen = set()
        for p in self.points:
            if p.id in seen:
                raise ValueError(f"duplicate point id {p.id!r}")
            seen.add(p.id)
            if len(p.values) not in (n_acq, n_grid):
                raise ValueError(
                    f"point {p.id}: series length {len(p.values)} matches neither "
                    f"{n_acq} acquisitions nor {n_grid} grid steps"
                )
        lengths = {len(p.values) for p in self.points}
        if len(lengths) > 1:
            raise ValueError("mixed regularized and unregularized series")
        if self.regularized and n_acq < n_grid:
            off = np.setdiff1d(np.arange(n_grid), slots)
            for p in self.points:
                if not np.all(np.isnan(p.values[off])):
                    raise ValueError(
                        f"point {p.id}: finite value at non-acquisition slot"
                    )

    @property
    def regularized(self) -> bool:
        if not self.points:
            return True
        return len(self.points[0].values) == self.time_grid.num_steps

    @property
    def acquisition_dates(self) -> list[dt.date]:
        return [self.time_grid.date_of(int(s)) for s in self.acquisition_slots]


@dataclass(frozen=True)
class Stack:
    """Dense-or-sparse raster cube (time, row, col), float32, NaN = missing."""

    time_grid: TimeGrid
    geo: GridGeo
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError("stack data must be 3-D (time, row, col)")
        if arr.shape[0] != self.time_grid.num_steps:
            raise ValueError(
                f"stack has {arr.shape[0]} frames but time grid has "
                f"{self.time_grid.num_steps} steps"
            )
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError("stack height and width must be >= 1")
        if arr.size == 0:
            raise ValueError("empty stack")
        if arr.size > _MAX_VOXELS:
            raise ValueError(f"stack exceeds {_MAX_VOXELS} voxels")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        finite = arr[np.isfinite(arr)]
        if finite.size and np.abs(finite).max() > VALUE_LIMIT_MM:
            raise ValueError(f"stack value exceeds {VALUE_LIMIT_MM:g} mm")
        object.__setattr__(self, "data", _readonly(arr))

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def dense(self) -> bool:
        return not np.isnan(self.data).any()


@dataclass(frozen=True)
class DetectionMap:
    """Boolean detection bits, (frames, row, col); frames is 1 for global maps."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 3:
            raise ValueError("detection bits must be 3-D (frames, row, col)")
        if arr.size == 0:
            raise ValueError("empty detection map")
        object.__setattr__(self, "bits", _readonly(np.ascontiguousarray(arr, dtype=bool)))

    @property
    def num_frames(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        return int(self.bits.sum())


# ---------------------------------------------------------------------------
# DSTK stack files


def write_stack(stack: Stack, path) -> None:
    """Write a Stack as a DSTK file.  NaNs are canonicalized to quiet NaN."""
    data = stack.data
    if data.size == 0:
        raise FormatError("empty stack")
    t, h, w = data.shape
    header = _DSTK_HEADER.pack(
        _DSTK_MAGIC,
        _DSTK_VERSION,
        0,
        t,
        h,
        w,
        stack.geo.x_origin,
        stack.geo.y_origin,
        stack.geo.cell_size,
        (stack.time_grid.epoch - _EPOCH_1970).days,
        stack.time_grid.step_days,
    )
    payload = np.ascontiguousarray(data, dtype="<f4").copy()
    bits = payload.view(np.uint32)
    bits[np.isnan(payload)] = _QUIET_NAN_BITS
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload.tobytes())


def read_stack(path) -> Stack:
    """Read a DSTK file back into a Stack."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _DSTK_HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    (magic, version, reserved, t, h, w, x0, y0, cell, epoch_days, step_days) = (
        _DSTK_HEADER.unpack_from(raw)
    )
    if magic != _DSTK_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _DSTK_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if reserved != 0:
        raise FormatError(f"{path}: reserved field must be zero")
    if t < 1 or h < 1 or w < 1:
        raise FormatError(f"{path}: non-positive dimensions {(t, h, w)}")
    n_voxels = t * h * w
    if n_voxels > _MAX_VOXELS:
        raise FormatError(f"{path}: dimensions exceed {_MAX_VOXELS} voxels")
    expected = _DSTK_HEADER.size + 4 * n_voxels
    if len(raw) < expected:
        raise FormatError(f"{path}: truncated payload ({len(raw)} of {expected} bytes)")
    if len(raw) > expected:
        raise FormatError(f"{path}: {len(raw) - expected} trailing bytes")
    if step_days < 1:
        raise FormatError(f"{path}: non-positive step_days {step_days}")
    data = np.frombuffer(raw, dtype="<f4", offset=_DSTK_HEADER.size).reshape(t, h, w)
    grid = TimeGrid(_EPOCH_1970 + dt.timedelta(days=epoch_days), t, step_days)
    return Stack(grid, GridGeo(x0, y0, cell), data)


# ---------------------------------------------------------------------------
# Point CSV files
#
# Layout: header 'id,easting,northing,<date>,...' with one ISO date column
# per acquisition; one row per point; empty or 'NaN' cells mark missing
# samples.  Values are written with 9 significant digits.


def write_points_csv(points: PointSet, path) -> None:
    """Write the acquisition-dated samples of a PointSet as CSV."""
    slots = points.acquisition_slots
    dates = [d.isoformat() for d in points.acquisition_dates]
    take = points.regularized and slots.size < points.time_grid.num_steps
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "easting", "northing", *dates])
        for p in points.points:
            vals = p.values[slots] if take else p.values
            cells = ["NaN" if np.isnan(v) else f"{v:.9g}" for v in vals]
            writer.writerow([p.id, f"{p.easting:.9g}", f"{p.northing:.9g}", *cells])


def _parse_float(cell: str, row: int, col: str, path) -> float:
    text = cell.strip()
    if text == "" or text.lower() == "nan":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise FormatError(
            f"{path}: row {row}, column {col!r}: bad number {cell!r}"
        ) from None


def read_points_csv(path) -> PointSet:
    """Read a point CSV.  The result carries a provisional daily time grid
    whose acquisition slots are the day offsets of the date columns;
    regularize against a real grid before rasterizing."""
    with open(path, "r", newline="") as f:
        rows = list(csv.reader(f))
    rows = [r for r in rows if r]
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 4 or [c.strip() for c in header[:3]] != ["id", "easting", "northing"]:
        raise FormatError(f"{path}: header must be 'id,easting,northing,<date>,...'")
    try:
        dates = [dt.date.fromisoformat(c.strip()) for c in header[3:]]
    except ValueError as e:
        raise FormatError(f"{path}: bad date column: {e}") from None
    offsets = [(d - dates[0]).days for d in dates]
    if any(b <= a for a, b in zip(offsets, offsets[1:])):
        raise FormatError(f"{path}: date columns must be strictly increasing")
    grid = TimeGrid(dates[0], offsets[-1] + 1, 1)
    names = header[3:]

    series = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(
                f"{path}: row {i}: expected {len(header)} cells, got {len(row)}"
            )
        pid = row[0].strip()
        e = _parse_float(row[1], i, "easting", path)
        n = _parse_float(row[2], i, "northing", path)
        if math.isnan(e) or math.isnan(n):
            raise FormatError(f"{path}: row {i}: missing coordinate")
        vals = [_parse_float(c, i, names[j], path) for j, c in enumerate(row[3:])]
        try:
            series.append(PointSeries(pid, e, n, np.array(vals)))
        except ValueError as err:
            raise FormatError(f"{path}: row {i}: {err}") from None
    try:
        return PointSet(grid, np.array(offsets), tuple(series))
    except ValueError as err:
        raise FormatError(f"{path}: {err}") from None
