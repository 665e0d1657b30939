"""slipstack: sparse displacement point series to dense raster stacks,
with spring-PDE inpainting, pluggable external backends, and variance
movement detectors."""

__version__ = "0.1.0"

from .detect import (
    DetectorConfig,
    dilate,
    threshold,
    variance_global,
    variance_local,
)
from .ingest import IngestConfig, build_time_grid, filter_coherence, ingest, regularize
from .inpaint import BackendSpec, SpringConfig, inpaint_external, inpaint_spring
from .model import (
    BackendError,
    DetectionMap,
    FormatError,
    GridGeo,
    PointSeries,
    PointSet,
    SlipstackError,
    Stack,
    TimeGrid,
    read_points_csv,
    read_stack,
    write_points_csv,
    write_stack,
)
from .preprocess import interp_missing, interp_time_linear, median_denoise
from .raster import cell_of, rasterize
from .synth import (
    Event,
    EventRecord,
    EventTruth,
    GridTruth,
    Metrics,
    Scenario,
    evaluate,
    generate_scenario,
)

__all__ = [
    "BackendError",
    "BackendSpec",
    "DetectionMap",
    "DetectorConfig",
    "Event",
    "EventRecord",
    "EventTruth",
    "FormatError",
    "GridGeo",
    "GridTruth",
    "IngestConfig",
    "Metrics",
    "PointSeries",
    "PointSet",
    "Scenario",
    "SlipstackError",
    "SpringConfig",
    "Stack",
    "TimeGrid",
    "build_time_grid",
    "cell_of",
    "dilate",
    "evaluate",
    "filter_coherence",
    "generate_scenario",
    "ingest",
    "inpaint_external",
    "inpaint_spring",
    "interp_missing",
    "interp_time_linear",
    "median_denoise",
    "rasterize",
    "read_points_csv",
    "read_stack",
    "regularize",
    "threshold",
    "variance_global",
    "variance_local",
    "write_points_csv",
    "write_stack",
]
