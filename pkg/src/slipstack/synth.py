"""Synthetic persistent-scatterer scenarios and detector evaluation.

Points are placed by homogeneous Poisson processes with separate urban
and rural densities (rural points are thinned out of the urban
rectangle).  Each point's series is the sum of event displacement,
Gaussian noise, and sparse spikes, with dropout NaNs.  Every point draws
from its own counter-based random substream, so generation is a pure
function of the scenario and independent of evaluation order.

Events are radially symmetric bumps that ramp up linearly in time:
displacement = amplitude * g(d) * r(t) with g(d) = exp(-d^2 / (2*(radius/2)^2))
inside the radius and r(t) = clamp((t - onset)/ramp_days, 0, 1).
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .model import DetectionMap, GridGeo, PointSeries, PointSet, SlipstackError, TimeGrid


@dataclass(frozen=True)
class Event:
    easting: float
    northing: float
    radius_m: float
    onset: dt.date
    ramp_days: int
    amplitude_mm: float

    def __post_init__(self):
        if not self.radius_m > 0:
            raise ValueError("event radius must be positive")
        if self.ramp_days < 1:
            raise ValueError("ramp_days must be >= 1")
        if not math.isfinite(self.amplitude_mm):
            raise ValueError("amplitude must be finite")


@dataclass(frozen=True)
class Scenario:
    extent_m: tuple[float, float] = (1000.0, 1000.0)
    duration_days: int = 480
    step_days: int = 6
    start: dt.date = dt.date(2020, 1, 1)
    urban_density: float = 200.0
    rural_density: float = 5.0
    urban_region: tuple[float, float, float, float] | None = None
    noise_sigma: float = 3.0
    spike_prob: float = 0.05
    spike_amp: float = 30.0
    dropout_prob: float = 0.05
    events: tuple[Event, ...] = ()
    seed: int = 0

    def __post_init__(self):
        w, h = self.extent_m
        if not (w > 0 and h > 0):
            raise ValueError("extent must be positive")
        if self.duration_days < 0 or self.step_days < 1:
            raise ValueError("bad duration or step")
        if self.urban_density < 0 or self.rural_density < 0:
            raise ValueError("densities must be >= 0")
        for name in ("spike_prob", "dropout_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be within [0, 1]")
        if self.noise_sigma < 0 or self.spike_amp < 0:
            raise ValueError("noise_sigma and spike_amp must be >= 0")
        if self.urban_region is not None:
            x0, y0, x1, y1 = self.urban_region
            if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
                raise ValueError("urban_region must be a rectangle inside the extent")
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "extent_m", tuple(float(v) for v in self.extent_m))
        end = self.start + dt.timedelta(days=self.duration_days)
        for e in self.events:
            if not self.start <= e.onset <= end:
                raise ValueError(
                    f"event onset {e.onset.isoformat()} outside the scenario window"
                )

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.start, self.duration_days // self.step_days + 1, self.step_days)


@dataclass(frozen=True)
class EventRecord:
    """Scene-space ground truth for one injected event."""

    easting: float
    northing: float
    radius_m: float
    onset_slot: int


@dataclass(frozen=True)
class EventTruth:
    events: tuple[EventRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def resolve(self, geo: GridGeo, height: int, width: int) -> "GridTruth":
        """Project event footprints onto a raster grid: a cell belongs to the
        footprint when its centre lies within the event radius."""
        rows = np.arange(height)
        cols = np.arange(width)
        cy = geo.y_origin + (height - rows - 0.5) * geo.cell_size
        cx = geo.x_origin + (cols + 0.5) * geo.cell_size
        footprints = []
        for e in self.events:
            d2 = (cx[np.newaxis, :] - e.easting) ** 2 + (cy[:, np.newaxis] - e.northing) ** 2
            footprints.append(d2 <= e.radius_m**2)
        return GridTruth(tuple(footprints), tuple(e.onset_slot for e in self.events))


@dataclass(frozen=True)
class GridTruth:
    """Event truth projected onto a raster grid."""

    footprints: tuple[np.ndarray, ...]
    onset_slots: tuple[int, ...]

    def __post_init__(self):
        if len(self.footprints) != len(self.onset_slots):
            raise ValueError("footprints and onset_slots must align")


def _place_points(s: Scenario, rng: np.random.Generator) -> np.ndarray:
    w, h = s.extent_m
    total_km2 = w * h / 1e6
    pts = []
    if s.urban_region is not None and s.urban_density > 0:
        x0, y0, x1, y1 = s.urban_region
        urban_km2 = (x1 - x0) * (y1 - y0) / 1e6
        n = rng.poisson(s.urban_density * urban_km2)
        e = rng.uniform(x0, x1, n)
        nn = rng.uniform(y0, y1, n)
        pts.append(np.column_stack([e, nn]))
    if s.rural_density > 0:
        n = rng.poisson(s.rural_density * total_km2)
        e = rng.uniform(0, w, n)
        nn = rng.uniform(0, h, n)
        rural = np.column_stack([e, nn])
        if s.urban_region is not None:
            x0, y0, x1, y1 = s.urban_region
            inside = (e >= x0) & (e < x1) & (nn >= y0) & (nn < y1)
            rural = rural[~inside]
        pts.append(rural)
    if not pts:
        return np.empty((0, 2))
    return np.concatenate(pts, axis=0)


def _event_displacement(s: Scenario, easting, northing, t_days: np.ndarray) -> np.ndarray:
    disp = np.zeros_like(t_days, dtype=np.float64)
    for e in s.events:
        d = math.hypot(easting - e.easting, northing - e.northing)
        if d > e.radius_m:
            continue
        sigma = e.radius_m / 2.0
        g = math.exp(-(d * d) / (2.0 * sigma * sigma))
        onset_off = (e.onset - s.start).days
        r = np.clip((t_days - onset_off) / e.ramp_days, 0.0, 1.0)
        disp += e.amplitude_mm * g * r
    return disp


def generate_scenario(s: Scenario) -> tuple[PointSet, EventTruth]:
    """Deterministic synthesis of a point set plus its injected ground truth."""
    grid = s.time_grid
    t_days = np.arange(grid.num_steps, dtype=np.float64) * s.step_days

    placement_rng = np.random.default_rng(np.random.SeedSequence([s.seed, 0]))
    coords = _place_points(s, placement_rng)
    if coords.shape[0] == 0:
        raise SlipstackError("scenario produced zero points")

    points = []
    for k, (e, n) in enumerate(coords):
        rng = np.random.default_rng(np.random.SeedSequence([s.seed, 1, k]))
        vals = _event_displacement(s, e, n, t_days)
        # fixed draw order per point: noise, spike mask, spike signs, dropout
        vals = vals + rng.normal(0.0, s.noise_sigma, grid.num_steps)
        spike_here = rng.random(grid.num_steps) < s.spike_prob
        spike_sign = np.where(rng.random(grid.num_steps) < 0.5, -1.0, 1.0)
        vals = vals + np.where(spike_here, spike_sign * s.spike_amp, 0.0)
        drop = rng.random(grid.num_steps) < s.dropout_prob
        vals = np.where(drop, np.nan, vals)
        points.append(PointSeries(f"P{k:05d}", float(e), float(n), vals))

    records = []
    for ev in s.events:
        onset_off = (ev.onset - s.start).days
        slot = min(math.ceil(onset_off / s.step_days), grid.num_steps - 1)
        records.append(EventRecord(ev.easting, ev.northing, ev.radius_m, slot))
    point_set = PointSet(grid, np.arange(grid.num_steps), tuple(points))
    return point_set, EventTruth(tuple(records))


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class EventOutcome:
    recalled: bool
    onset_slot: int
    hit_slots: tuple[int, ...]


@dataclass(frozen=True)
class Metrics:
    n_detections: int
    n_matched: int
    precision: float
    recall: float
    zero_detections: bool
    events: tuple[EventOutcome, ...]

    def to_dict(self) -> dict:
        return {
            "n_detections": self.n_detections,
            "n_matched": self.n_matched,
            "precision": self.precision,
            "recall": self.recall,
            "zero_detections": self.zero_detections,
            "events": [
                {
                    "recalled": e.recalled,
                    "onset_slot": e.onset_slot,
                    "hit_slots": list(e.hit_slots),
                }
                for e in self.events
            ],
        }


def evaluate(
    detections: DetectionMap,
    truth: GridTruth,
    spatial_tol: int = 2,
    temporal_tol: int = 2,
) -> Metrics:
    """Score a detection map against injected events.

    An event is recalled when a detection falls within spatial_tol cells
    (Chebyshev) of its footprint and, for multi-frame maps, within
    temporal_tol frames at or after its onset slot.  Single-frame maps
    (global detector) ignore time.  Precision counts detections matching
    any event; with zero detections it is 1.0 by convention and flagged.
    """
    if spatial_tol < 0 or temporal_tol < 0:
        raise ValueError("tolerances must be >= 0")
    bits = detections.bits
    n_frames = bits.shape[0]
    if truth.footprints and truth.footprints[0].shape != bits.shape[1:]:
        raise SlipstackError(
            f"detection map {bits.shape[1:]} does not match truth grid "
            f"{truth.footprints[0].shape}"
        )

    matched = np.zeros_like(bits)
    outcomes = []
    for footprint, onset in zip(truth.footprints, truth.onset_slots):
        tolerant = footprint
        if spatial_tol > 0:
            side = 2 * spatial_tol + 1
            tolerant = ndimage.binary_dilation(footprint, np.ones((side, side), bool))
        if n_frames == 1:
            frame_ok = np.ones(1, dtype=bool)
        else:
            t = np.arange(n_frames)
            frame_ok = (t >= onset) & (t <= onset + temporal_tol)
        event_hits = bits & tolerant[np.newaxis] & frame_ok[:, np.newaxis, np.newaxis]
        matched |= event_hits
        hit_slots = tuple(int(t) for t in np.flatnonzero(event_hits.any(axis=(1, 2))))
        outcomes.append(EventOutcome(bool(event_hits.any()), int(onset), hit_slots))

    n_det = int(bits.sum())
    n_matched = int(matched.sum())
    precision = 1.0 if n_det == 0 else n_matched / n_det
    n_events = len(truth.footprints)
    recall = 1.0 if n_events == 0 else sum(o.recalled for o in outcomes) / n_events
    return Metrics(
        n_detections=n_det,
        n_matched=n_matched,
        precision=precision,
        recall=recall,
        zero_detections=n_det == 0,
        events=tuple(outcomes),
    )


# ---------------------------------------------------------------------------
# JSON forms (scenario config files and truth side-files)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "extent_m": list(s.extent_m),
        "duration_days": s.duration_days,
        "step_days": s.step_days,
        "start": s.start.isoformat(),
        "urban_density": s.urban_density,
        "rural_density": s.rural_density,
        "urban_region": None if s.urban_region is None else list(s.urban_region),
        "noise_sigma": s.noise_sigma,
        "spike_prob": s.spike_prob,
        "spike_amp": s.spike_amp,
        "dropout_prob": s.dropout_prob,
        "seed": s.seed,
        "events": [
            {
                "easting": e.easting,
                "northing": e.northing,
                "radius_m": e.radius_m,
                "onset": e.onset.isoformat(),
                "ramp_days": e.ramp_days,
                "amplitude_mm": e.amplitude_mm,
            }
            for e in s.events
        ],
    }


def scenario_from_dict(d: dict) -> Scenario:
    known = {
        "extent_m", "duration_days", "step_days", "start", "urban_density",
        "rural_density", "urban_region", "noise_sigma", "spike_prob",
        "spike_amp", "dropout_prob", "events", "seed",
    }
    extra = set(d) - known
    if extra:
        raise SlipstackError(f"unknown scenario fields: {sorted(extra)}")
    kwargs = dict(d)
    if "start" in kwargs:
        kwargs["start"] = dt.date.fromisoformat(kwargs["start"])
    if kwargs.get("extent_m") is not None:
        kwargs["extent_m"] = tuple(kwargs["extent_m"])
    if kwargs.get("urban_region") is not None:
        kwargs["urban_region"] = tuple(kwargs["urban_region"])
    events = []
    for e in kwargs.get("events", []):
        events.append(
            Event(
                easting=float(e["easting"]),
                northing=float(e["northing"]),
                radius_m=float(e["radius_m"]),
                onset=dt.date.fromisoformat(e["onset"]),
                ramp_days=int(e["ramp_days"]),
                amplitude_mm=float(e["amplitude_mm"]),
            )
        )
    kwargs["events"] = tuple(events)
    try:
        return Scenario(**kwargs)
    except (TypeError, ValueError) as err:
        raise SlipstackError(f"bad scenario config: {err}") from None


def truth_to_dict(truth: EventTruth) -> dict:
    return {
        "events": [
            {
                "easting": e.easting,
                "northing": e.northing,
                "radius_m": e.radius_m,
                "onset_slot": e.onset_slot,
            }
            for e in truth.events
        ]
    }


def truth_from_dict(d: dict) -> EventTruth:
    try:
        return EventTruth(
            tuple(
                EventRecord(
                    float(e["easting"]),
                    float(e["northing"]),
                    float(e["radius_m"]),
                    int(e["onset_slot"]),
                )
                for e in d["events"]
            )
        )
    except (KeyError, TypeError, ValueError) as err:
        raise SlipstackError(f"bad truth file: {err}") from None
