import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geotort.grid import (
    MV1_HEADER_SIZE,
    PhaseVolume,
    VolumeFormatError,
    VoxelGrid,
    WindowSpec,
    delinearize,
    extract_window,
    full_grid_window,
    linear_index,
    load_volume,
    read_header,
    save_volume,
)

dims_st = st.tuples(st.integers(1, 8), st.integers(1, 8), st.integers(2, 8))


def random_grid(rng, dims, p=0.5, h=1.0):
    return VoxelGrid(rng.random(dims) < p, h=h)


# ---------------------------------------------------------------------------
# linear index
# ---------------------------------------------------------------------------


@given(dims_st, st.data())
def test_linear_index_bijection(dims, data):
    nx, ny, nz = dims
    x = data.draw(st.integers(0, nx - 1))
    y = data.draw(st.integers(0, ny - 1))
    z = data.draw(st.integers(0, nz - 1))
    i = linear_index(x, y, z, dims)
    assert 0 <= i < nx * ny * nz
    assert delinearize(i, dims) == (x, y, z)


def test_linear_index_is_payload_order():
    rng = np.random.default_rng(7)
    g = random_grid(rng, (3, 4, 5))
    flat = g.data.astype(np.uint8).tobytes(order="F")
    for i in range(g.data.size):
        x, y, z = delinearize(i, g.dims)
        assert flat[i] == g.data[x, y, z]


# ---------------------------------------------------------------------------
# MV1 round trips
# ---------------------------------------------------------------------------


def test_save_load_roundtrip_16cubed(tmp_path):
    rng = np.random.default_rng(0)
    g = random_grid(rng, (16, 16, 16), h=0.25)
    save_volume(g, tmp_path / "g.mv1")
    assert load_volume(tmp_path / "g.mv1") == g


def test_roundtrip_200_random_grids(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "g.mv1"
    for _ in range(200):
        dims = tuple(rng.integers(1, 33, size=3))
        g = VoxelGrid(rng.random(dims) < rng.random(), h=float(rng.uniform(0.1, 3.0)))
        save_volume(g, path)
        assert load_volume(path) == g


def test_phase_volume_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    labels = rng.integers(1, 4, size=(5, 6, 7)).astype(np.uint8)
    vol = PhaseVolume(labels, h=2.0, phase_count=3)
    save_volume(vol, tmp_path / "v.mv1")
    back = load_volume(tmp_path / "v.mv1")
    assert isinstance(back, PhaseVolume)
    assert back == vol
    assert back.select_phase(2) == VoxelGrid(labels == 2, h=2.0)


def test_truncated_payload_rejected(tmp_path):
    g = VoxelGrid(np.ones((4, 4, 4), dtype=bool))
    path = tmp_path / "g.mv1"
    save_volume(g, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-5])
    with pytest.raises(VolumeFormatError, match="size mismatch"):
        load_volume(path)


def test_handcrafted_header_all_foreground(tmp_path):
    # header laid out by hand per the MV1 byte layout
    header = struct.pack("<4sIIIIdBB", b"MVOX", 1, 4, 4, 4, 1.0, 1, 0x01)
    header += b"\x00" * (MV1_HEADER_SIZE - len(header))
    path = tmp_path / "hand.mv1"
    path.write_bytes(header + b"\x01" * 64)
    g = load_volume(path)
    assert isinstance(g, VoxelGrid)
    assert g.dims == (4, 4, 4) and g.h == 1.0
    assert g.data.all()


def test_payload_byte_positions(tmp_path):
    data = np.zeros((2, 2, 2), dtype=bool)
    data[1, 1, 1] = True
    path = tmp_path / "one.mv1"
    save_volume(VoxelGrid(data), path)
    payload = path.read_bytes()[MV1_HEADER_SIZE:]
    assert list(payload) == [0] * 7 + [1]

    empty = tmp_path / "empty.mv1"
    save_volume(VoxelGrid(np.zeros((1, 1, 1), dtype=bool)), empty)
    assert empty.read_bytes()[MV1_HEADER_SIZE:] == b"\x00"


@pytest.mark.parametrize(
    "mutate, match",
    [
        (lambda b: b"XVOX" + b[4:], "magic"),
        (lambda b: b[:4] + struct.pack("<I", 9) + b[8:], "version"),
        (lambda b: b[:29] + b"\x02" + b[30:], "endianness"),
    ],
)
def test_bad_headers_rejected(tmp_path, mutate, match):
    path = tmp_path / "bad.mv1"
    save_volume(VoxelGrid(np.ones((2, 2, 2), dtype=bool)), path)
    raw = bytearray(path.read_bytes())
    path.write_bytes(mutate(bytes(raw)))
    with pytest.raises(VolumeFormatError, match=match):
        load_volume(path)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_volume("/nonexistent/volume.mv1")


def test_read_header(tmp_path):
    g = VoxelGrid(np.zeros((3, 5, 7), dtype=bool), h=0.5)
    save_volume(g, tmp_path / "g.mv1")
    hdr = read_header(tmp_path / "g.mv1")
    assert hdr.dims == (3, 5, 7) and hdr.h == 0.5 and hdr.phase_count == 1


@settings(max_examples=40)
@given(dims_st, st.integers(0, 2**32 - 1), st.floats(0.1, 4.0))
def test_roundtrip_property(tmp_path_factory, dims, seed, h):
    rng = np.random.default_rng(seed)
    g = VoxelGrid(rng.random(dims) < 0.5, h=h)
    path = tmp_path_factory.mktemp("mv1") / "g.mv1"
    save_volume(g, path)
    assert load_volume(path) == g


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------


def test_extract_full_grid_identity():
    rng = np.random.default_rng(3)
    g = random_grid(rng, (6, 7, 8))
    assert extract_window(g, full_grid_window(g.dims)) == g


def test_extract_core_block():
    rng = np.random.default_rng(4)
    g = random_grid(rng, (8, 8, 8))
    w = WindowSpec(lateral=(4, 4), height_n=3, origin=(2, 2, 2))
    got = extract_window(g, w)
    assert got == VoxelGrid(g.data[2:6, 2:6, 2:6].copy())


def test_extract_with_margins():
    rng = np.random.default_rng(5)
    g = random_grid(rng, (8, 8, 8))
    w = WindowSpec(
        lateral=(4, 4), height_n=3, origin=(2, 2, 2), margin_lateral=1, margin_below=1
    )
    got = extract_window(g, w, include_margins=True)
    assert got.dims == (6, 6, 5)
    assert got == VoxelGrid(g.data[1:7, 1:7, 1:6].copy())
    # inlet plane of the core window sits at z = margin_below of the output
    assert np.array_equal(got.data[:, :, 1], g.data[1:7, 1:7, 2])


def test_extract_out_of_bounds_rejected():
    g = VoxelGrid(np.zeros((4, 4, 4), dtype=bool))
    with pytest.raises(ValueError):
        extract_window(g, WindowSpec(lateral=(4, 4), height_n=3, origin=(1, 0, 0)))
    with pytest.raises(ValueError):
        WindowSpec(lateral=(2, 2), height_n=2, origin=(0, 0, 0), margin_lateral=1)


def test_nested_extraction_composes():
    rng = np.random.default_rng(6)
    g = random_grid(rng, (10, 10, 10))
    outer = WindowSpec(lateral=(8, 8), height_n=7, origin=(1, 1, 1))
    inner = WindowSpec(lateral=(4, 4), height_n=3, origin=(2, 2, 2))
    composed = WindowSpec(lateral=(4, 4), height_n=3, origin=(3, 3, 3))
    assert extract_window(extract_window(g, outer), inner) == extract_window(g, composed)


def test_window_geometry_accessors():
    w = WindowSpec(lateral=(5, 4), height_n=6, origin=(3, 3, 2), margin_lateral=2, margin_below=1)
    assert w.inlet_z == 2 and w.outlet_z == 8
    assert w.transport_length(0.5) == 3.0
    assert w.core_slices() == (slice(3, 8), slice(3, 7), slice(2, 9))
    assert w.dilated_slices() == (slice(1, 10), slice(1, 9), slice(1, 9))
    rel = w.relative_to_dilated()
    assert rel.origin == (2, 2, 1) and rel.lateral == w.lateral


def test_grid_immutable():
    g = VoxelGrid(np.zeros((2, 2, 2), dtype=bool))
    with pytest.raises(ValueError):
        g.data[0, 0, 0] = True
