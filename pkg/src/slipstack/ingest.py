"""Ingest scattered point series: coherence filtering and temporal regularization.

Acquisition calendars are irregular (gaps, early 12-day revisit).  The
pipeline first drops points whose series are too sparse to be trusted,
then snaps the remaining samples onto a fixed-step time grid, inserting
NaN at steps without an acquisition.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import PointSeries, PointSet, SlipstackError, TimeGrid


@dataclass(frozen=True)
class IngestConfig:
    """max_missing_frac: drop points with a larger NaN fraction (boundary kept).
    step_days: target regular acquisition interval."""

    max_missing_frac: float = 0.15
    step_days: int = 6

    def __post_init__(self):
        if not 0.0 <= self.max_missing_frac <= 1.0:
            raise ValueError("max_missing_frac must be within [0, 1]")
        if self.step_days < 1:
            raise ValueError("step_days must be >= 1")


def filter_coherence(points: PointSet, config: IngestConfig = IngestConfig()) -> PointSet:
    """Drop points whose missing fraction over the acquisitions exceeds the cutoff.

    The fraction is computed over acquisition slots only, so inserted
    regularization NaNs do not count against a point.  An empty result
    is allowed.
    """
    slots = points.acquisition_slots
    take = points.regularized and slots.size < points.time_grid.num_steps
    kept = []
    for p in points.points:
        vals = p.values[slots] if take else p.values
        frac = float(np.isnan(vals).mean())
        if frac <= config.max_missing_frac:
            kept.append(p)
    return PointSet(points.time_grid, slots, tuple(kept))


def build_time_grid(dates: Sequence[dt.date], step_days: int = 6) -> TimeGrid:
    """Build the regular grid spanning the given acquisition dates.

    The epoch is the earliest date; num_steps spans through the latest.
    Eligibility is not checked here: dates are snapped when regularizing,
    and two dates landing on one slot is an error there.
    """
    if not dates:
        raise SlipstackError("no acquisition dates")
    if step_days < 1:
        raise ValueError("step_days must be >= 1")
    epoch = min(dates)
    span = (max(dates) - epoch).days
    return TimeGrid(epoch, span // step_days + 1, step_days)


def _snap_slots(points: PointSet, grid: TimeGrid) -> np.ndarray:
    slots = np.empty(points.acquisition_slots.size, dtype=np.int64)
    for i, date in enumerate(points.acquisition_dates):
        slots[i] = grid.slot_of(date)
    for a, b, i in zip(slots, slots[1:], range(1, slots.size)):
        if b <= a:
            d0 = points.acquisition_dates[i - 1]
            d1 = points.acquisition_dates[i]
            raise SlipstackError(
                f"acquisitions {d0.isoformat()} and {d1.isoformat()} collide "
                f"on slot {b} of the {grid.step_days}-day grid"
            )
    return slots


def regularize(points: PointSet, grid: TimeGrid) -> PointSet:
    """Spread series onto the regular grid, NaN where no acquisition exists.

    Each acquisition date snaps to its nearest slot; distinct dates must
    land on distinct slots.  Already-regular input comes back unchanged
    apart from the grid metadata.
    """
    if points.regularized and points.time_grid == grid:
        return points
    slots = _snap_slots(points, grid)
    take = points.regularized and points.acquisition_slots.size < points.time_grid.num_steps
    out = []
    for p in points.points:
        vals = p.values[points.acquisition_slots] if take else p.values
        full = np.full(grid.num_steps, np.nan)
        full[slots] = vals
        out.append(PointSeries(p.id, p.easting, p.northing, full))
    return PointSet(grid, slots, tuple(out))


def ingest(points: PointSet, config: IngestConfig = IngestConfig()) -> PointSet:
    """filter_coherence then regularize onto the grid spanned by the acquisitions."""
    kept = filter_coherence(points, config)
    grid = build_time_grid(kept.acquisition_dates, config.step_days)
    return regularize(kept, grid)
