"""Core types and file formats: construction contracts, DSTK and CSV round-trips."""

import datetime as dt

import numpy as np
import pytest

from slipstack.model import (
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

EPOCH = dt.date(2020, 1, 1)


def make_stack(data, epoch=EPOCH, step=6, x0=0.0, y0=0.0, cell=20.0):
    data = np.asarray(data, dtype=np.float32)
    return Stack(TimeGrid(epoch, data.shape[0], step), GridGeo(x0, y0, cell), data)


# ---------------------------------------------------------------------------
# Types


def test_time_grid_dates():
    grid = TimeGrid(EPOCH, 4, 6)
    assert grid.date_of(0) == EPOCH
    assert grid.date_of(3) == EPOCH + dt.timedelta(days=18)
    assert grid.slot_of(EPOCH + dt.timedelta(days=12)) == 2
    with pytest.raises(ValueError):
        grid.date_of(4)
    with pytest.raises(SlipstackError):
        grid.slot_of(EPOCH + dt.timedelta(days=40))


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(EPOCH, 0, 6)
    with pytest.raises(ValueError):
        TimeGrid(EPOCH, 4, 0)


def test_point_series_validation():
    PointSeries("a", 0.0, 0.0, [1.0, np.nan])
    with pytest.raises(ValueError):
        PointSeries("", 0.0, 0.0, [1.0])
    with pytest.raises(ValueError):
        PointSeries("a", np.nan, 0.0, [1.0])
    with pytest.raises(ValueError):
        PointSeries("a", 0.0, 0.0, [])
    with pytest.raises(ValueError):
        PointSeries("a", 0.0, 0.0, [1.0e5])


def test_point_series_immutable():
    p = PointSeries("a", 0.0, 0.0, [1.0, 2.0])
    with pytest.raises(ValueError):
        p.values[0] = 9.0


def test_point_set_validation():
    grid = TimeGrid(EPOCH, 4, 6)
    a = PointSeries("a", 0.0, 0.0, [1.0, 2.0])
    b = PointSeries("b", 5.0, 5.0, [3.0, 4.0])
    ps = PointSet(grid, [0, 2], (a, b))
    assert not ps.regularized
    assert ps.acquisition_dates == [EPOCH, EPOCH + dt.timedelta(days=12)]

    with pytest.raises(ValueError, match="duplicate"):
        PointSet(grid, [0, 2], (a, a))
    with pytest.raises(ValueError, match="increasing"):
        PointSet(grid, [2, 0], (a,))
    with pytest.raises(ValueError, match="outside"):
        PointSet(grid, [0, 9], (a,))
    with pytest.raises(ValueError, match="length"):
        PointSet(grid, [0, 2], (PointSeries("c", 0.0, 0.0, [1.0, 2.0, 3.0]),))


def test_point_set_regularized_invariant():
    grid = TimeGrid(EPOCH, 4, 6)
    ok = PointSeries("a", 0.0, 0.0, [1.0, np.nan, 2.0, 3.0])
    ps = PointSet(grid, [0, 2, 3], (ok,))
    assert ps.regularized
    bad = PointSeries("a", 0.0, 0.0, [1.0, 7.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="non-acquisition"):
        PointSet(grid, [0, 2, 3], (bad,))


def test_point_set_mixed_lengths():
    grid = TimeGrid(EPOCH, 4, 6)
    a = PointSeries("a", 0.0, 0.0, [1.0, 2.0, 3.0])  # 3 acquisitions
    b = PointSeries("b", 5.0, 5.0, [1.0, np.nan, 2.0, 3.0])  # 4 grid steps
    with pytest.raises(ValueError, match="mixed"):
        PointSet(grid, [0, 2, 3], (a, b))


def test_stack_validation():
    with pytest.raises(ValueError):
        make_stack(np.zeros((2, 2)))  # not 3-D
    with pytest.raises(ValueError):
        Stack(TimeGrid(EPOCH, 3, 6), GridGeo(0, 0, 20.0), np.zeros((2, 2, 2), np.float32))
    with pytest.raises(ValueError):
        GridGeo(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        make_stack(np.full((1, 2, 2), 2.0e4))
    s = make_stack(np.zeros((2, 3, 4)))
    assert (s.num_frames, s.height, s.width) == (2, 3, 4)
    assert s.dense
    assert s.data.dtype == np.float32
    with pytest.raises(ValueError):
        s.data[0, 0, 0] = 1.0


# ---------------------------------------------------------------------------
# DSTK


def test_dstk_round_trip_small(tmp_path):
    rng = np.random.default_rng(7)
    data = rng.normal(0, 10, (3, 4, 5)).astype(np.float32)
    data[rng.random(data.shape) < 0.3] = np.nan
    stack = make_stack(data, x0=1000.5, y0=-250.25, cell=12.5)
    path = tmp_path / "s.dstk"
    write_stack(stack, path)
    back = read_stack(path)
    assert back.time_grid == stack.time_grid
    assert back.geo == stack.geo
    # bit-level comparison covers NaN payloads too
    assert np.array_equal(back.data.view(np.uint32), stack.data.view(np.uint32))


def test_dstk_single_voxel_layout(tmp_path):
    # header is 52 bytes, payload 4: one voxel makes a 56-byte file
    stack = make_stack(np.array([[[1.5]]], dtype=np.float32))
    path = tmp_path / "one.dstk"
    write_stack(stack, path)
    raw = path.read_bytes()
    assert len(raw) == 56
    assert raw[:4] == b"DSTK"
    assert int.from_bytes(raw[4:6], "little") == 1  # version
    assert int.from_bytes(raw[6:8], "little") == 0  # reserved
    assert np.frombuffer(raw[52:], dtype="<f4")[0] == np.float32(1.5)


def test_dstk_nan_canonicalized(tmp_path):
    # a payload NaN with nonstandard bits must be written as quiet NaN
    odd_nan = np.array([0x7FC00123], dtype=np.uint32).view(np.float32)[0]
    stack = make_stack(np.array([[[odd_nan, 1.0]]], dtype=np.float32))
    path = tmp_path / "n.dstk"
    write_stack(stack, path)
    bits = np.frombuffer(path.read_bytes()[52:], dtype="<u4")
    assert bits[0] == 0x7FC00000


def test_dstk_round_trip_bit_exact_many(tmp_path):
    for seed in range(25):
        rng = np.random.default_rng(seed)
        shape = tuple(rng.integers(1, 7, size=3))
        data = rng.normal(0, 100, shape).astype(np.float32)
        data[rng.random(shape) < rng.uniform(0, 0.9)] = np.nan
        stack = make_stack(data, x0=float(rng.normal()), y0=float(rng.normal()))
        path = tmp_path / f"{seed}.dstk"
        write_stack(stack, path)
        write_stack(read_stack(path), tmp_path / "again.dstk")
        assert path.read_bytes() == (tmp_path / "again.dstk").read_bytes()


def test_dstk_read_errors(tmp_path):
    stack = make_stack(np.ones((2, 2, 2), dtype=np.float32))
    good = tmp_path / "good.dstk"
    write_stack(stack, good)
    raw = bytearray(good.read_bytes())

    bad = tmp_path / "bad.dstk"
    bad.write_bytes(b"JUNK" + bytes(raw[4:]))
    with pytest.raises(FormatError, match="magic"):
        read_stack(bad)

    bad.write_bytes(bytes(raw[:30]))
    with pytest.raises(FormatError, match="truncated"):
        read_stack(bad)

    bad.write_bytes(bytes(raw[:-4]))
    with pytest.raises(FormatError, match="truncated"):
        read_stack(bad)

    bad.write_bytes(bytes(raw) + b"xx")
    with pytest.raises(FormatError, match="trailing"):
        read_stack(bad)

    v2 = bytearray(raw)
    v2[4:6] = (2).to_bytes(2, "little")
    bad.write_bytes(bytes(v2))
    with pytest.raises(FormatError, match="version"):
        read_stack(bad)

    res = bytearray(raw)
    res[6:8] = (1).to_bytes(2, "little")
    bad.write_bytes(bytes(res))
    with pytest.raises(FormatError, match="reserved"):
        read_stack(bad)


# ---------------------------------------------------------------------------
# Point CSV


def _sample_set():
    grid = TimeGrid(EPOCH, 4, 6)
    a = PointSeries("a", 100.25, 200.5, [1.5, np.nan, 3.0])
    b = PointSeries("b", -50.0, 75.0, [0.123456789, 2.0, -4.5])
    return PointSet(grid, [0, 2, 3], (a, b))


def test_csv_round_trip(tmp_path):
    ps = _sample_set()
    path = tmp_path / "p.csv"
    write_points_csv(ps, path)
    back = read_points_csv(path)
    assert back.acquisition_dates == ps.acquisition_dates
    assert [p.id for p in back.points] == ["a", "b"]
    for orig, rt in zip(ps.points, back.points):
        assert rt.easting == orig.easting and rt.northing == orig.northing
        assert np.allclose(rt.values, orig.values, equal_nan=True, rtol=1e-8)


def test_csv_round_trip_regularized(tmp_path):
    grid = TimeGrid(EPOCH, 4, 6)
    a = PointSeries("a", 0.0, 0.0, [1.0, np.nan, 2.0, 3.0])
    ps = PointSet(grid, [0, 2, 3], (a,))
    path = tmp_path / "p.csv"
    write_points_csv(ps, path)
    back = read_points_csv(path)
    # only the acquisition columns travel; values align with the dates
    assert back.acquisition_dates == ps.acquisition_dates
    assert np.allclose(back.points[0].values, [1.0, 2.0, 3.0], equal_nan=True)


def test_csv_nan_cells(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text(
        "id,easting,northing,2020-01-01,2020-01-07\n"
        "a,0,0,NaN,1.5\n"
        "b,5,5,,nan\n"
    )
    ps = read_points_csv(path)
    assert np.isnan(ps.points[0].values[0])
    assert np.isnan(ps.points[1].values).all()


def test_csv_errors(tmp_path):
    path = tmp_path / "p.csv"

    path.write_text("id,easting,northing,2020-01-01\na,0,0,abc\n")
    with pytest.raises(FormatError, match=r"row 2.*2020-01-01.*'abc'"):
        read_points_csv(path)

    path.write_text("id,easting,northing,2020-01-07,2020-01-01\na,0,0,1,2\n")
    with pytest.raises(FormatError, match="increasing"):
        read_points_csv(path)

    path.write_text("id,easting,northing,2020-01-01\na,0,0,1\na,1,1,2\n")
    with pytest.raises(FormatError, match="duplicate"):
        read_points_csv(path)

    path.write_text("")
    with pytest.raises(FormatError, match="empty"):
        read_points_csv(path)

    path.write_text("id,east,north,2020-01-01\na,0,0,1\n")
    with pytest.raises(FormatError, match="header"):
        read_points_csv(path)

    path.write_text("id,easting,northing,2020-01-01\na,0,0\n")
    with pytest.raises(FormatError, match="row 2"):
        read_points_csv(path)
