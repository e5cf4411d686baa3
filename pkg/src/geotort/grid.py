"""Dense 3D voxel volumes, analysis windows, and the MV1 file format.

Conventions used throughout the package:

* A volume of dims ``(nx, ny, nz)`` stores one value per voxel; voxel
  ``(x, y, z)`` sits at physical position ``(x*h, y*h, z*h)`` (voxel
  centers on a cubic lattice with spacing ``h``).
* The linear index of ``(x, y, z)`` is ``x + nx*(y + ny*z)`` (x fastest),
  which is also the payload order of MV1 files.
* Transport direction is +z.  Volumes measured along another axis are
  expected to be permuted before analysis.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MV1_MAGIC = b"MVOX"
MV1_VERSION = 1
MV1_HEADER_SIZE = 64


class VolumeFormatError(Exception):
    """Raised when an MV1 file is malformed or unsupported."""


class UndefinedEstimateError(Exception):
    """Raised when an estimator is undefined, e.g. for an empty phase."""


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Binary voxel volume: ``data[x, y, z]`` is True on the phase."""

    data: np.ndarray  # bool, shape (nx, ny, nz)
    h: float = 1.0

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=bool)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"expected a non-degenerate 3D volume, got shape {data.shape}")
        if not self.h > 0:
            raise ValueError(f"voxel spacing must be positive, got {self.h}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def count(self) -> int:
        """Number of foreground voxels."""
        return int(self.data.sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, VoxelGrid)
            and self.h == other.h
            and self.dims == other.dims
            and bool(np.array_equal(self.data, other.data))
        )


@dataclass(frozen=True, eq=False)
class PhaseVolume:
    """Multi-phase voxel volume: ``labels[x, y, z]`` in ``0..phase_count``."""

    labels: np.ndarray  # uint8, shape (nx, ny, nz)
    h: float = 1.0
    phase_count: int = 1

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if labels.ndim != 3 or min(labels.shape) < 1:
            raise ValueError(f"expected a non-degenerate 3D volume, got shape {labels.shape}")
        if not self.h > 0:
            raise ValueError(f"voxel spacing must be positive, got {self.h}")
        if not 1 <= self.phase_count <= 255:
            raise ValueError(f"phase_count must be in 1..255, got {self.phase_count}")
        if labels.max(initial=0) > self.phase_count:
            raise ValueError("label exceeds phase_count")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.labels.shape

    def select_phase(self, phase: int) -> VoxelGrid:
        """Binary grid of one phase label (1-based)."""
        if not 1 <= phase <= self.phase_count:
            raise ValueError(f"phase must be in 1..{self.phase_count}, got {phase}")
        return VoxelGrid(self.labels == phase, h=self.h)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PhaseVolume)
            and self.h == other.h
            and self.phase_count == other.phase_count
            and self.dims == other.dims
            and bool(np.array_equal(self.labels, other.labels))
        )


@dataclass(frozen=True)
class VolumeHeader:
    """Decoded MV1 header."""

    dims: tuple[int, int, int]
    h: float
    phase_count: int
    little_endian: bool = True
    version: int = MV1_VERSION


@dataclass(frozen=True)
class WindowSpec:
    """Core analysis window plus plus-sampling margins, in voxel units.

    The core window spans ``origin .. origin + (wx-1, wy-1, height_n)``
    inside the stored grid.  The inlet plane is the slice ``z = origin[2]``
    and the outlet plane is ``z = origin[2] + height_n`` (transport length
    ``l = height_n * h``).  The dilated window adds ``margin_lateral``
    voxels on each lateral side and ``margin_below`` voxels below the
    inlet; nothing is added above the outlet.
    """

    lateral: tuple[int, int]
    height_n: int
    origin: tuple[int, int, int] = (0, 0, 0)
    margin_lateral: int = 0
    margin_below: int = 0

    def __post_init__(self):
        wx, wy = self.lateral
        ox, oy, oz = self.origin
        if wx < 1 or wy < 1:
            raise ValueError(f"lateral window size must be positive, got {self.lateral}")
        if self.height_n < 1:
            raise ValueError(f"height_n must be >= 1, got {self.height_n}")
        if self.margin_lateral < 0 or self.margin_below < 0:
            raise ValueError("margins must be non-negative")
        if ox < self.margin_lateral or oy < self.margin_lateral or oz < self.margin_below:
            raise ValueError("window margins do not fit below/left of the core window")

    @property
    def inlet_z(self) -> int:
        return self.origin[2]

    @property
    def outlet_z(self) -> int:
        return self.origin[2] + self.height_n

    def transport_length(self, h: float) -> float:
        return self.height_n * h

    def validate_for(self, dims: tuple[int, int, int], with_margins: bool = True) -> None:
        nx, ny, nz = dims
        wx, wy = self.lateral
        ox, oy, oz = self.origin
        m = self.margin_lateral if with_margins else 0
        mb = self.margin_below if with_margins else 0
        if ox - m < 0 or oy - m < 0 or oz - mb < 0:
            raise ValueError(f"window {self} exceeds grid dims {dims} below the origin")
        if ox + wx + m > nx or oy + wy + m > ny or self.outlet_z >= nz:
            raise ValueError(f"window {self} exceeds grid dims {dims}")

    def core_slices(self) -> tuple[slice, slice, slice]:
        ox, oy, oz = self.origin
        wx, wy = self.lateral
        return (slice(ox, ox + wx), slice(oy, oy + wy), slice(oz, oz + self.height_n + 1))

    def dilated_slices(self) -> tuple[slice, slice, slice]:
        ox, oy, oz = self.origin
        wx, wy = self.lateral
        m, mb = self.margin_lateral, self.margin_below
        return (
            slice(ox - m, ox + wx + m),
            slice(oy - m, oy + wy + m),
            slice(oz - mb, oz + self.height_n + 1),
        )

    def relative_to_dilated(self) -> "WindowSpec":
        """The same window expressed in the coordinates of its extracted dilated block."""
        m, mb = self.margin_lateral, self.margin_below
        return WindowSpec(
            lateral=self.lateral,
            height_n=self.height_n,
            origin=(m, m, mb),
            margin_lateral=m,
            margin_below=mb,
        )


def linear_index(x: int, y: int, z: int, dims: tuple[int, int, int]) -> int:
    """Linear voxel index, x fastest."""
    nx, ny, _ = dims
    return x + nx * (y + ny * z)


def delinearize(i: int, dims: tuple[int, int, int]) -> tuple[int, int, int]:
    """Inverse of :func:`linear_index`."""
    nx, ny, _ = dims
    return (i % nx, (i // nx) % ny, i // (nx * ny))


def full_grid_window(dims: tuple[int, int, int]) -> WindowSpec:
    """Window covering the whole grid, inlet at z=0, no margins."""
    nx, ny, nz = dims
    if nz < 2:
        raise ValueError("grid needs at least 2 z-slices for an inlet/outlet pair")
    return WindowSpec(lateral=(nx, ny), height_n=nz - 1)


# ---------------------------------------------------------------------------
# MV1 file format
# ---------------------------------------------------------------------------
# 64-byte header, little-endian:
#   0   4s   magic "MVOX"
#   4   u32  version (=1)
#   8   u32  nx
#   12  u32  ny
#   16  u32  nz
#   20  f64  h
#   28  u8   phase_count
#   29  u8   endianness marker (0x01 = little-endian)
#   30  34x  zero padding
# followed by nx*ny*nz payload bytes in x-fastest order.

_HEADER_STRUCT = struct.Struct("<4sIIIIdBB34x")


def _encode_header(dims, h, phase_count) -> bytes:
    return _HEADER_STRUCT.pack(MV1_MAGIC, MV1_VERSION, *dims, h, phase_count, 0x01)


def _decode_header(raw: bytes) -> VolumeHeader:
    if len(raw) < MV1_HEADER_SIZE:
        raise VolumeFormatError("file too short for an MV1 header")
    magic, version, nx, ny, nz, h, phase_count, endian = _HEADER_STRUCT.unpack(raw)
    if magic != MV1_MAGIC:
        raise VolumeFormatError(f"bad magic {magic!r}, expected {MV1_MAGIC!r}")
    if version != MV1_VERSION:
        raise VolumeFormatError(f"unsupported MV1 version {version}")
    if endian != 0x01:
        raise VolumeFormatError(f"unsupported endianness marker {endian:#x}")
    if min(nx, ny, nz) < 1:
        raise VolumeFormatError(f"degenerate dims {(nx, ny, nz)}")
    if not h > 0:
        raise VolumeFormatError(f"non-positive voxel spacing {h}")
    if phase_count < 1:
        raise VolumeFormatError("phase_count must be >= 1")
    return VolumeHeader(dims=(nx, ny, nz), h=h, phase_count=phase_count)


def save_volume(volume: VoxelGrid | PhaseVolume, path) -> None:
    """Write a volume as an MV1 file (bit-exact round trip with load_volume)."""
    if isinstance(volume, VoxelGrid):
        payload = volume.data.astype(np.uint8)
        phase_count = 1
    elif isinstance(volume, PhaseVolume):
        payload = volume.labels
        phase_count = volume.phase_count
    else:
        raise TypeError(f"cannot save {type(volume).__name__} as a volume")
    with open(path, "wb") as fh:
        fh.write(_encode_header(volume.dims, volume.h, phase_count))
        fh.write(payload.tobytes(order="F"))


def load_volume(path) -> VoxelGrid | PhaseVolume:
    """Read an MV1 file; binary files load as VoxelGrid, k-phase as PhaseVolume."""
    with open(path, "rb") as fh:
        header = _decode_header(fh.read(MV1_HEADER_SIZE))
        payload = fh.read()
    nx, ny, nz = header.dims
    expected = nx * ny * nz
    if len(payload) != expected:
        raise VolumeFormatError(
            f"payload size mismatch: header implies {expected} bytes, found {len(payload)}"
        )
    labels = np.frombuffer(payload, dtype=np.uint8).reshape(header.dims, order="F")
    if header.phase_count == 1:
        return VoxelGrid(labels != 0, h=header.h)
    return PhaseVolume(labels.copy(), h=header.h, phase_count=header.phase_count)


def read_header(path) -> VolumeHeader:
    with open(path, "rb") as fh:
        return _decode_header(fh.read(MV1_HEADER_SIZE))


def extract_window(grid: VoxelGrid, w: WindowSpec, include_margins: bool = False) -> VoxelGrid:
    """Copy of the core window, optionally with its plus-sampling margins.

    With margins the inlet plane of the core window sits at z-index
    ``w.margin_below`` of the output block.
    """
    w.validate_for(grid.dims, with_margins=include_margins)
    sl = w.dilated_slices() if include_margins else w.core_slices()
    return VoxelGrid(grid.data[sl].copy(), h=grid.h)
