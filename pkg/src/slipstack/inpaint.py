"""Densify sparse stacks with the spring (discrete harmonic) model.

Grid voxels are joined to their in-grid neighbours by unit springs; at
equilibrium every unknown voxel equals the mean of its neighbours.
Restricted to the unknowns this is a symmetric positive-definite
graph-Laplacian system, solved matrix-free with Jacobi-preconditioned
conjugate gradients from a zero initial guess.  Known voxels pass
through bit-exactly.

inpaint_external bridges to out-of-process backends over a small file
protocol: the stack goes out as DSTK, the backend is invoked as
`<command> --input <in.dstk> --output <out.dstk> --config <cfg>`, and
its output must come back dense with identical dims, geo and time grid.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import BackendError, SlipstackError, Stack, read_stack, write_stack

CONNECTIVITIES = ("spatial4", "spatiotemporal6")

_MAX_ITER_CAP = 50000


@dataclass(frozen=True)
class SpringConfig:
    """connectivity: spatial4 couples within frames only; spatiotemporal6 adds
    the two temporal neighbours.  max_iter None means 10*(H+W+T), capped."""

    connectivity: str = "spatiotemporal6"
    rel_tol: float = 1e-8
    max_iter: int | None = None

    def __post_init__(self):
        if self.connectivity not in CONNECTIVITIES:
            raise ValueError(f"unknown connectivity {self.connectivity!r}")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def iterations_for(self, shape) -> int:
        if self.max_iter is not None:
            return self.max_iter
        t, h, w = shape
        return min(10 * (h + w + t), _MAX_ITER_CAP)


def _neighbor_sum(vol: np.ndarray, axes) -> np.ndarray:
    """Sum of the in-grid neighbours of every voxel along the given axes."""
    out = np.zeros_like(vol)
    for ax in axes:
        if vol.shape[ax] < 2:
            continue
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        out[tuple(lo)] += vol[tuple(hi)]
        out[tuple(hi)] += vol[tuple(lo)]
    return out


def _degree(shape, axes) -> np.ndarray:
    deg = np.zeros(shape, dtype=np.float64)
    for ax in axes:
        n = shape[ax]
        if n < 2:
            continue
        edge = np.full(n, 2.0)
        edge[0] = edge[-1] = 1.0
        view = [np.newaxis] * 3
        view[ax] = slice(None)
        deg += edge[tuple(view)]
    return deg


def _pcg(apply_a, b, diag, rel_tol, max_iter):
    """Jacobi-preconditioned conjugate gradients, zero initial guess.
    Returns (x, iterations, relative_residual)."""
    b_norm = float(np.linalg.norm(b))
    x = np.zeros_like(b)
    if b_norm == 0.0:
        return x, 0, 0.0
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    rel = 1.0
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rel = float(np.linalg.norm(r)) / b_norm
        if rel <= rel_tol:
            return x, it, rel
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return None, max_iter, rel


def inpaint_spring(stack: Stack, config: SpringConfig = SpringConfig()) -> Stack:
    """Fill every NaN voxel with its spring-equilibrium value."""
    data = stack.data.astype(np.float64)
    known = np.isfinite(data)
    if not known.any():
        raise SlipstackError("all-NaN stack: nothing anchors the interpolation")
    if known.all():
        return stack

    axes = (1, 2) if config.connectivity == "spatial4" else (0, 1, 2)
    if config.connectivity == "spatial4":
        empty = np.flatnonzero(~known.any(axis=(1, 2)))
        if empty.size:
            raise SlipstackError(
                f"frame {empty[0]} has no finite voxel; spatial4 cannot "
                "interpolate a fully unknown frame"
            )

    unknown = ~known
    deg = _degree(data.shape, axes)
    known_vals = np.where(known, data, 0.0)
    b = _neighbor_sum(known_vals, axes)[unknown]
    deg_u = deg[unknown]
    full = np.zeros_like(data)

    def apply_a(vec):
        full[unknown] = vec
        out = deg_u * vec - _neighbor_sum(full, axes)[unknown]
        return out

    max_iter = config.iterations_for(data.shape)
    x, iters, rel = _pcg(apply_a, b, deg_u, config.rel_tol, max_iter)
    if x is None:
        raise SlipstackError(
            f"spring solver did not converge within {max_iter} iterations "
            f"(relative residual {rel:.3e} > rel_tol {config.rel_tol:.3e})"
        )

    out = stack.data.copy()
    out[unknown] = x.astype(np.float32)
    return Stack(stack.time_grid, stack.geo, out)


@dataclass(frozen=True)
class BackendSpec:
    """External inpainting backend: executable plus its own config file."""

    command: str | Path
    config_path: str | Path


def inpaint_external(stack: Stack, backend: BackendSpec) -> Stack:
    """Round-trip the stack through a backend subprocess and validate the result."""
    command = Path(backend.command)
    if not command.is_file() or not os.access(command, os.X_OK):
        raise BackendError(f"backend command {command} is not an executable file")
    config_path = Path(backend.config_path)
    if not config_path.is_file():
        raise BackendError(f"backend config {config_path} does not exist")

    with tempfile.TemporaryDirectory(prefix="slipstack-backend-") as tmp:
        in_path = Path(tmp) / "in.dstk"
        out_path = Path(tmp) / "out.dstk"
        write_stack(stack, in_path)
        argv = [
            str(command),
            "--input", str(in_path),
            "--output", str(out_path),
            "--config", str(config_path),
        ]
        proc = subprocess.run(argv, capture_output=True, text=True)
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-8:]
            err = BackendError(
                f"backend exited with code {proc.returncode}: "
                + (" | ".join(tail) if tail else "(no stderr)")
            )
            err.returncode = proc.returncode
            err.stderr = proc.stderr
            raise err
        if not out_path.is_file():
            raise BackendError("backend exited 0 but wrote no output file")
        result = read_stack(out_path)

    if result.data.shape != stack.data.shape:
        raise BackendError(
            f"shape mismatch: backend returned {result.data.shape}, "
            f"expected {stack.data.shape}"
        )
    if result.geo != stack.geo:
        raise BackendError("backend changed the grid georeference")
    if result.time_grid != stack.time_grid:
        raise BackendError("backend changed the time grid")
    if np.isnan(result.data).any():
        raise BackendError("backend output contains NaN")
    return result
