"""Variance detectors: arithmetic examples, brute-force oracle, algebra
properties, and map export formats."""

import datetime as dt

import numpy as np
import pytest

from slipstack.detect import (
    DetectorConfig,
    dilate,
    read_detections_csv,
    threshold,
    variance_global,
    variance_local,
    write_detection_pgm,
    write_detections_csv,
)
from slipstack.model import DetectionMap, FormatError, GridGeo, SlipstackError, Stack, TimeGrid

EPOCH = dt.date(2020, 1, 1)


def _stack(data):
    data = np.asarray(data, dtype=np.float32)
    return Stack(TimeGrid(EPOCH, data.shape[0], 6), GridGeo(0, 0, 20.0), data)


def brute_local_variance(data, window):
    """Triple-loop clipped-window population variance, NaN omitted (oracle)."""
    wt, wy, wx = window
    t_n, h, w = data.shape
    out = np.full(data.shape, np.nan)
    for t in range(t_n):
        for y in range(h):
            for x in range(w):
                sl = data[
                    max(0, t - wt // 2) : t + wt // 2 + 1,
                    max(0, y - wy // 2) : y + wy // 2 + 1,
                    max(0, x - wx // 2) : x + wx // 2 + 1,
                ]
                vals = sl[np.isfinite(sl)]
                if vals.size >= 2:
                    out[t, y, x] = np.mean((vals - vals.mean()) ** 2)
    return out


# ---------------------------------------------------------------------------
# Global variance


def test_global_variance_examples():
    stack = _stack(np.array([-5.0, 5.0]).reshape(2, 1, 1))
    assert np.allclose(variance_global(stack), [[25.0]])

    stack = _stack(np.full((4, 1, 1), 3.25))
    assert np.allclose(variance_global(stack), [[0.0]])

    stack = _stack(np.array([0.0, 0.0, 0.0, 12.0]).reshape(4, 1, 1))
    assert np.allclose(variance_global(stack), [[27.0]])


def test_global_variance_nan_handling():
    data = np.array([[1.0, np.nan], [3.0, np.nan], [np.nan, 4.0]], dtype=np.float32)
    stack = _stack(data.reshape(3, 1, 2))
    var = variance_global(stack)
    assert np.allclose(var[0, 0], 1.0)  # population variance of {1,3}
    assert np.isnan(var[0, 1])  # single finite sample

    with pytest.raises(SlipstackError, match="2 frames"):
        variance_global(_stack(np.zeros((1, 2, 2))))


# ---------------------------------------------------------------------------
# Local variance


def test_local_variance_constant_zero():
    stack = _stack(np.full((6, 6, 6), 7.5))
    assert np.allclose(variance_local(stack, (5, 5, 5)), 0.0, atol=1e-9)


def test_local_variance_corner_clipped():
    rng = np.random.default_rng(2)
    data = rng.normal(0, 2, (8, 8, 8))
    stack = _stack(data)
    var = variance_local(stack, (5, 5, 5))
    sl = stack.data[:3, :3, :3].astype(np.float64)
    expect = np.mean((sl - sl.mean()) ** 2)
    assert abs(var[0, 0, 0] - expect) <= 1e-9


@pytest.mark.parametrize("seed", range(20))
def test_local_variance_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    data = rng.normal(0, 4, (6, 6, 6))
    data[rng.random(data.shape) < 0.25] = np.nan
    stack = _stack(data)
    var = variance_local(stack, (5, 5, 5))
    expect = brute_local_variance(stack.data.astype(np.float64), (5, 5, 5))
    assert np.allclose(var, expect, equal_nan=True, atol=1e-9)


def test_local_variance_full_temporal_window_equals_global(seed=4):
    rng = np.random.default_rng(seed)
    data = rng.normal(0, 3, (5, 4, 4))
    data[rng.random(data.shape) < 0.2] = np.nan
    stack = _stack(data)
    glob = variance_global(stack)
    local = variance_local(stack, (2 * 5 - 1, 1, 1))
    for t in range(5):
        assert np.allclose(local[t], glob, equal_nan=True, atol=1e-9)


def test_local_variance_window_validation():
    stack = _stack(np.zeros((3, 3, 3)))
    with pytest.raises(SlipstackError, match="odd"):
        variance_local(stack, (4, 5, 5))
    with pytest.raises(SlipstackError, match="every dim"):
        variance_local(stack, (5, 5, 5))
    # window exceeding only some dims is fine (clipped)
    variance_local(stack, (3, 5, 5))


# ---------------------------------------------------------------------------
# Threshold and dilation


def test_threshold_strict():
    var = np.array([[150.0, 150.1], [np.nan, 149.9]])
    dmap = threshold(var, 150.0)
    assert dmap.bits.shape == (1, 2, 2)
    assert dmap.bits[0].tolist() == [[False, True], [False, False]]
    with pytest.raises(SlipstackError):
        threshold(var, 0.0)


def test_dilate_examples():
    bits = np.zeros((1, 5, 5), dtype=bool)
    bits[0, 2, 2] = True
    dmap = DetectionMap(bits)
    out = dilate(dmap, 1)
    assert out.bits[0, 1:4, 1:4].all()
    assert out.count == 9

    assert dilate(dmap, 0) is dmap

    full = DetectionMap(np.ones((2, 3, 3), dtype=bool))
    assert dilate(full, 2).bits.all()


def test_dilate_stays_within_frame():
    bits = np.zeros((2, 4, 4), dtype=bool)
    bits[0, 0, 0] = True
    out = dilate(DetectionMap(bits), 1)
    assert out.bits[0, :2, :2].all()
    assert not out.bits[1].any()  # no temporal bleed


# ---------------------------------------------------------------------------
# Algebra properties (50 random inputs each)


@pytest.mark.parametrize("seed", range(50))
def test_threshold_monotone(seed):
    rng = np.random.default_rng(seed)
    var = rng.uniform(0, 300, (4, 5, 5))
    var[rng.random(var.shape) < 0.1] = np.nan
    t1, t2 = sorted(rng.uniform(10, 250, 2))
    low = threshold(var, t1).bits
    high = threshold(var, t2 + 1e-9).bits
    assert not (high & ~low).any()


@pytest.mark.parametrize("seed", range(50))
def test_variance_shift_scale_laws(seed):
    # integer values, integer shift, power-of-two scale: all exact in f32,
    # so the tolerance exercises the detector arithmetic, not input rounding
    rng = np.random.default_rng(seed)
    data = rng.integers(-40, 40, (6, 5, 5)).astype(np.float64)
    data[rng.random(data.shape) < 0.2] = np.nan
    stack = _stack(data)
    var = variance_global(stack)
    var_l = variance_local(stack, (3, 3, 3))

    c, alpha = 13.0, 2.0

    def rel_gap(a, b):
        mask = np.isfinite(b)
        return np.max(np.abs(a[mask] - b[mask])) / max(1.0, np.max(np.abs(b[mask])))

    assert rel_gap(variance_global(_stack(data + c)), var) <= 1e-9
    assert rel_gap(variance_global(_stack(data * alpha)), alpha**2 * var) <= 1e-9
    assert rel_gap(variance_local(_stack(data + c), (3, 3, 3)), var_l) <= 1e-9
    assert rel_gap(variance_local(_stack(data * alpha), (3, 3, 3)), alpha**2 * var_l) <= 1e-9


@pytest.mark.parametrize("seed", range(50))
def test_dilation_extensive_and_monotone(seed):
    rng = np.random.default_rng(seed)
    bits = rng.random((3, 6, 6)) < 0.15
    if not bits.any():
        bits[0, 0, 0] = True
    dmap = DetectionMap(bits)
    d1 = dilate(dmap, 1)
    d2 = dilate(dmap, 2)
    assert not (dmap.bits & ~d1.bits).any()  # extensive
    assert not (d1.bits & ~d2.bits).any()  # monotone in radius


def test_variance_nonnegative_many():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        data = rng.normal(100, 30, (4, 4, 4))
        data[rng.random(data.shape) < 0.3] = np.nan
        stack = _stack(data)
        v = variance_global(stack)
        assert np.nanmin(v) >= 0.0
        vl = variance_local(stack, (3, 3, 3))
        assert np.nanmin(vl) >= 0.0


# ---------------------------------------------------------------------------
# Config and export


def test_detector_config_validation():
    DetectorConfig(mode="local", threshold=50.0, window=(5, 5, 5))
    with pytest.raises(ValueError):
        DetectorConfig(mode="fuzzy")
    with pytest.raises(ValueError):
        DetectorConfig(threshold=0.0)
    with pytest.raises(ValueError):
        DetectorConfig(window=(4, 5, 5))
    with pytest.raises(ValueError):
        DetectorConfig(dilate_radius=-1)


def test_detection_csv_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    bits = rng.random((3, 4, 5)) < 0.3
    dmap = DetectionMap(bits)
    path = tmp_path / "d.csv"
    write_detections_csv(dmap, path)
    back = read_detections_csv(path, 3, 4, 5)
    assert np.array_equal(back.bits, dmap.bits)
    assert path.read_text().splitlines()[0] == "t,row,col"


def test_detection_csv_errors(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("t,row,col\n9,0,0\n")
    with pytest.raises(FormatError, match="out of bounds"):
        read_detections_csv(path, 2, 2, 2)
    path.write_text("t,row,col\na,b,c\n")
    with pytest.raises(FormatError, match="bad index"):
        read_detections_csv(path, 2, 2, 2)
    path.write_text("x,y\n")
    with pytest.raises(FormatError, match="header"):
        read_detections_csv(path, 2, 2, 2)


def test_pgm_export(tmp_path):
    bits = np.zeros((1, 2, 3), dtype=bool)
    bits[0, 1, 2] = True
    path = tmp_path / "f.pgm"
    write_detection_pgm(DetectionMap(bits), 0, path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n3 2\n255\n")
    assert raw[-6:] == bytes([0, 0, 0, 0, 0, 255])
