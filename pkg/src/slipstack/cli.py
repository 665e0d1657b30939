"""Command-line pipeline for point-to-stack conditioning and detection.

Subcommands map one-to-one onto pipeline stages and exchange files in
the package formats (point CSV, DSTK stacks, detection CSV, JSON
reports).  `pipeline` chains every stage from one JSON config; each
stage is also runnable on its own with the same config file plus flag
overrides, producing byte-identical artifacts.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 external
backend failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .detect import (
    DetectorConfig,
    dilate,
    read_detections_csv,
    threshold,
    variance_global,
    variance_local,
    write_detection_pgm,
    write_detections_csv,
)
from .ingest import IngestConfig, build_time_grid, filter_coherence, regularize
from .inpaint import BackendSpec, SpringConfig, inpaint_external, inpaint_spring
from .model import (
    BackendError,
    SlipstackError,
    read_points_csv,
    read_stack,
    write_points_csv,
    write_stack,
)
from .preprocess import MEDIAN_MODES, interp_missing, median_denoise
from .raster import rasterize
from .synth import (
    evaluate,
    generate_scenario,
    scenario_from_dict,
    scenario_to_dict,
    truth_from_dict,
    truth_to_dict,
)

_STAGES = ("synth", "ingest", "preprocess", "rasterize", "inpaint", "detect", "eval")

_DEFAULT_CONFIG = {
    "scenario": None,
    "input_csv": None,
    "ingest": {"max_missing_frac": 0.15, "step_days": 6},
    "preprocess": {"interp": True, "median": "temporal3"},
    "raster": {"cell_size": 20.0, "bounds": None},
    "inpaint": {
        "method": "spring",
        "connectivity": "spatiotemporal6",
        "rel_tol": 1e-8,
        "max_iter": None,
        "backend_command": None,
        "backend_config": None,
    },
    "detect": {
        "mode": "global",
        "threshold": 150.0,
        "window": [5, 5, 5],
        "dilate_radius": 0,
        "pgm": False,
    },
    "eval": {"spatial_tol": 2, "temporal_tol": 2},
}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Effective config


def _merge_section(base: dict, override: dict, name: str) -> dict:
    out = dict(base)
    for key, val in override.items():
        if key not in base:
            raise SlipstackError(f"unknown key {key!r} in config section {name!r}")
        out[key] = val
    return out


def load_config(path=None) -> dict:
    """Parse a pipeline config file and fill every section with defaults."""
    cfg = copy.deepcopy(_DEFAULT_CONFIG)
    if path is None:
        return cfg
    try:
        with open(path) as f:
            user = json.load(f)
    except json.JSONDecodeError as e:
        raise SlipstackError(f"{path}: invalid JSON: {e}") from None
    if not isinstance(user, dict):
        raise SlipstackError(f"{path}: config must be a JSON object")
    for section, value in user.items():
        if section not in cfg:
            raise SlipstackError(f"{path}: unknown config section {section!r}")
        if section in ("scenario", "input_csv"):
            cfg[section] = value
        else:
            if not isinstance(value, dict):
                raise SlipstackError(f"{path}: section {section!r} must be an object")
            cfg[section] = _merge_section(cfg[section], value, section)
    return cfg


def canonical_config(cfg: dict) -> dict:
    """Normalized config used for hashing: scenario defaults filled in."""
    out = copy.deepcopy(cfg)
    if out.get("scenario") is not None:
        out["scenario"] = scenario_to_dict(scenario_from_dict(out["scenario"]))
    return out


def provenance_for(cfg: dict) -> dict:
    canon = canonical_config(cfg)
    digest = hashlib.sha256(
        json.dumps(canon, sort_keys=True).encode("utf-8")
    ).hexdigest()
    seed = None
    if canon.get("scenario") is not None:
        seed = canon["scenario"].get("seed")
    return {
        "tool": "slipstack",
        "config_sha256": digest,
        "seed": seed,
        "stage_versions": {stage: __version__ for stage in _STAGES},
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _write_json(obj: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# Stage bodies (shared by subcommands and `pipeline`)


def stage_synth(cfg: dict, out_points, out_truth) -> None:
    if cfg.get("scenario") is None:
        raise SlipstackError("config has no scenario section")
    scenario = scenario_from_dict(cfg["scenario"])
    points, truth = generate_scenario(scenario)
    write_points_csv(points, out_points)
    _write_json(truth_to_dict(truth), out_truth)


def stage_ingest(cfg: dict, in_csv, out_csv) -> None:
    section = cfg["ingest"]
    icfg = IngestConfig(
        max_missing_frac=float(section["max_missing_frac"]),
        step_days=int(section["step_days"]),
    )
    points = read_points_csv(in_csv)
    kept = filter_coherence(points, icfg)
    if not kept.points:
        raise SlipstackError("no points survive the coherence filter")
    grid = build_time_grid(kept.acquisition_dates, icfg.step_days)
    write_points_csv(regularize(kept, grid), out_csv)


def stage_preprocess(cfg: dict, in_csv, out_csv) -> None:
    section = cfg["preprocess"]
    mode = section["median"]
    if mode not in MEDIAN_MODES:
        raise SlipstackError(f"unknown median mode {mode!r}")
    step = int(cfg["ingest"]["step_days"])
    points = read_points_csv(in_csv)
    grid = build_time_grid(points.acquisition_dates, step)
    points = regularize(points, grid)
    if section["interp"]:
        points = interp_missing(points)
    if mode == "temporal3":
        points = median_denoise(points, mode)
    write_points_csv(points, out_csv)


def stage_rasterize(cfg: dict, in_csv, out_dstk) -> None:
    section = cfg["raster"]
    step = int(cfg["ingest"]["step_days"])
    points = read_points_csv(in_csv)
    grid = build_time_grid(points.acquisition_dates, step)
    points = regularize(points, grid)
    stack = rasterize(points, float(section["cell_size"]), section["bounds"])
    # the spatial median needs the raster neighbourhood, so it runs here
    # rather than in the point-domain preprocess stage
    if cfg["preprocess"]["median"] == "spatial3x3":
        stack = median_denoise(stack, "spatial3x3")
    write_stack(stack, out_dstk)


def stage_inpaint(cfg: dict, in_dstk, out_dstk) -> None:
    section = cfg["inpaint"]
    stack = read_stack(in_dstk)
    if section["method"] == "spring":
        spring = SpringConfig(
            connectivity=section["connectivity"],
            rel_tol=float(section["rel_tol"]),
            max_iter=None if section["max_iter"] is None else int(section["max_iter"]),
        )
        dense = inpaint_spring(stack, spring)
    elif section["method"] == "external":
        if not section["backend_command"] or not section["backend_config"]:
            raise SlipstackError(
                "external inpainting needs backend_command and backend_config"
            )
        spec = BackendSpec(section["backend_command"], section["backend_config"])
        dense = inpaint_external(stack, spec)
    else:
        raise SlipstackError(f"unknown inpaint method {section['method']!r}")
    write_stack(dense, out_dstk)


def stage_detect(cfg: dict, in_dstk, out_csv, pgm_dir=None) -> None:
    section = cfg["detect"]
    dcfg = DetectorConfig(
        mode=section["mode"],
        threshold=float(section["threshold"]),
        window=tuple(section["window"]),
        dilate_radius=int(section["dilate_radius"]),
    )
    stack = read_stack(in_dstk)
    if dcfg.mode == "global":
        var = variance_global(stack)
    else:
        var = variance_local(stack, dcfg.window)
    dmap = dilate(threshold(var, dcfg.threshold), dcfg.dilate_radius)
    write_detections_csv(dmap, out_csv)
    if pgm_dir is not None:
        pgm_dir = Path(pgm_dir)
        pgm_dir.mkdir(parents=True, exist_ok=True)
        for frame in range(dmap.num_frames):
            write_detection_pgm(dmap, frame, pgm_dir / f"frame_{frame:04d}.pgm")


def stage_eval(cfg: dict, detections_csv, stack_dstk, out_json, truth_json=None) -> None:
    section = cfg["eval"]
    stack = read_stack(stack_dstk)
    frames = stack.num_frames if cfg["detect"]["mode"] == "local" else 1
    dmap = read_detections_csv(detections_csv, frames, stack.height, stack.width)
    report = {"provenance": provenance_for(cfg)}
    if truth_json is not None:
        with open(truth_json) as f:
            truth = truth_from_dict(json.load(f))
        grid_truth = truth.resolve(stack.geo, stack.height, stack.width)
        metrics = evaluate(
            dmap,
            grid_truth,
            spatial_tol=int(section["spatial_tol"]),
            temporal_tol=int(section["temporal_tol"]),
        )
        report["metrics"] = metrics.to_dict()
    else:
        report["metrics"] = {
            "n_detections": dmap.count,
            "zero_detections": dmap.count == 0,
        }
    _write_json(report, out_json)


def run_pipeline(cfg: dict, out_dir) -> Path:
    """Chain every stage, leaving all intermediate artifacts in out_dir.
    Returns the report path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth_path = None
    if cfg.get("scenario") is not None:
        raw_csv = out / "points_raw.csv"
        truth_path = out / "truth.json"
        _run_stage("synth", stage_synth, cfg, raw_csv, truth_path)
    elif cfg.get("input_csv"):
        raw_csv = Path(cfg["input_csv"])
        if not raw_csv.is_file():
            raise SlipstackError(f"input_csv {raw_csv} does not exist")
    else:
        raise SlipstackError("config needs either a scenario section or input_csv")

    ingested = out / "points_ingested.csv"
    preprocessed = out / "points_preprocessed.csv"
    sparse = out / "sparse.dstk"
    dense = out / "dense.dstk"
    detections = out / "detections.csv"
    report = out / "report.json"
    _run_stage("ingest", stage_ingest, cfg, raw_csv, ingested)
    _run_stage("preprocess", stage_preprocess, cfg, ingested, preprocessed)
    _run_stage("rasterize", stage_rasterize, cfg, preprocessed, sparse)
    _run_stage("inpaint", stage_inpaint, cfg, sparse, dense)
    pgm_dir = out / "pgm" if cfg["detect"]["pgm"] else None
    _run_stage("detect", stage_detect, cfg, dense, detections, pgm_dir)
    _run_stage("eval", stage_eval, cfg, detections, dense, report, truth_path)
    return report


def _run_stage(name, fn, cfg, *args):
    try:
        fn(cfg, *args)
    except BackendError as e:
        raise BackendError(f"{name}: {e}") from None
    except SlipstackError as e:
        raise SlipstackError(f"{name}: {e}") from None
    except OSError as e:
        raise SlipstackError(f"{name}: {e}") from None


# ---------------------------------------------------------------------------
# Argument parsing


def _add_config_flag(p):
    p.add_argument("--config", help="pipeline JSON config; flags override it")


def _build_parser() -> _Parser:
    parser = _Parser(prog="slipstack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"slipstack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scenario", parents=[])
    _add_config_flag(p)
    p.add_argument("--out-points", required=True)
    p.add_argument("--out-truth", required=True)

    p = sub.add_parser("ingest", help="coherence-filter and regularize points")
    _add_config_flag(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-missing-frac", type=float)
    p.add_argument("--step-days", type=int)

    p = sub.add_parser("preprocess", help="interpolate gaps and despike")
    _add_config_flag(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--median", choices=MEDIAN_MODES)
    p.add_argument("--no-interp", action="store_true")
    p.add_argument("--step-days", type=int)

    p = sub.add_parser("rasterize", help="grid points into a sparse DSTK stack")
    _add_config_flag(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--cell-size", type=float)
    p.add_argument("--bounds", help="x0,y0,x1,y1 in metres")
    p.add_argument("--step-days", type=int)

    p = sub.add_parser("inpaint", help="densify a stack (spring PDE or backend)")
    _add_config_flag(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--method", choices=("spring", "external"))
    p.add_argument("--connectivity", choices=("spatial4", "spatiotemporal6"))
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--backend-command")
    p.add_argument("--backend-config")

    p = sub.add_parser("detect", help="variance detector over a stack")
    _add_config_flag(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mode", choices=("global", "local"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--window", help="wt,wy,wx (odd)")
    p.add_argument("--dilate", type=int)
    p.add_argument("--pgm-dir")

    p = sub.add_parser("eval", help="score detections against event truth")
    _add_config_flag(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--stack", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth")
    p.add_argument("--spatial-tol", type=int)
    p.add_argument("--temporal-tol", type=int)

    p = sub.add_parser("pipeline", help="run every stage from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)

    return parser


def _triple(text: str, flag: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise SlipstackError(f"{flag} expects three comma-separated integers")
    try:
        return [int(v) for v in parts]
    except ValueError:
        raise SlipstackError(f"{flag} expects integers, got {text!r}") from None


def _effective_config(args) -> dict:
    cfg = load_config(args.config)
    over = {}
    if getattr(args, "max_missing_frac", None) is not None:
        over.setdefault("ingest", {})["max_missing_frac"] = args.max_missing_frac
    if getattr(args, "step_days", None) is not None:
        over.setdefault("ingest", {})["step_days"] = args.step_days
    if getattr(args, "median", None) is not None:
        over.setdefault("preprocess", {})["median"] = args.median
    if getattr(args, "no_interp", False):
        over.setdefault("preprocess", {})["interp"] = False
    if getattr(args, "cell_size", None) is not None:
        over.setdefault("raster", {})["cell_size"] = args.cell_size
    if getattr(args, "bounds", None) is not None:
        vals = args.bounds.split(",")
        if len(vals) != 4:
            raise SlipstackError("--bounds expects x0,y0,x1,y1")
        try:
            over.setdefault("raster", {})["bounds"] = [float(v) for v in vals]
        except ValueError:
            raise SlipstackError(f"--bounds expects numbers, got {args.bounds!r}") from None
    if getattr(args, "method", None) is not None:
        over.setdefault("inpaint", {})["method"] = args.method
    if getattr(args, "connectivity", None) is not None:
        over.setdefault("inpaint", {})["connectivity"] = args.connectivity
    if getattr(args, "rel_tol", None) is not None:
        over.setdefault("inpaint", {})["rel_tol"] = args.rel_tol
    if getattr(args, "max_iter", None) is not None:
        over.setdefault("inpaint", {})["max_iter"] = args.max_iter
    if getattr(args, "backend_command", None) is not None:
        over.setdefault("inpaint", {})["backend_command"] = args.backend_command
    if getattr(args, "backend_config", None) is not None:
        over.setdefault("inpaint", {})["backend_config"] = args.backend_config
    if getattr(args, "mode", None) is not None:
        over.setdefault("detect", {})["mode"] = args.mode
    if getattr(args, "threshold", None) is not None:
        over.setdefault("detect", {})["threshold"] = args.threshold
    if getattr(args, "window", None) is not None:
        over.setdefault("detect", {})["window"] = _triple(args.window, "--window")
    if getattr(args, "dilate", None) is not None:
        over.setdefault("detect", {})["dilate_radius"] = args.dilate
    if getattr(args, "spatial_tol", None) is not None:
        over.setdefault("eval", {})["spatial_tol"] = args.spatial_tol
    if getattr(args, "temporal_tol", None) is not None:
        over.setdefault("eval", {})["temporal_tol"] = args.temporal_tol
    for section, values in over.items():
        cfg[section] = _merge_section(cfg[section], values, section)
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        cfg = _effective_config(args) if command != "pipeline" else load_config(args.config)
        if command == "synth":
            stage_synth(cfg, args.out_points, args.out_truth)
        elif command == "ingest":
            stage_ingest(cfg, args.input, args.output)
        elif command == "preprocess":
            stage_preprocess(cfg, args.input, args.output)
        elif command == "rasterize":
            stage_rasterize(cfg, args.input, args.output)
        elif command == "inpaint":
            stage_inpaint(cfg, args.input, args.output)
        elif command == "detect":
            stage_detect(cfg, args.input, args.output, args.pgm_dir)
        elif command == "eval":
            stage_eval(cfg, args.detections, args.stack, args.out, args.truth)
        elif command == "pipeline":
            run_pipeline(cfg, args.out_dir)
        return 0
    except BackendError as e:
        print(f"slipstack {command}: backend error: {e}", file=sys.stderr)
        return 3
    except SlipstackError as e:
        print(f"slipstack {command}: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"slipstack {command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
