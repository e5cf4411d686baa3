"""Exact Euclidean distance transforms and ball morphology on voxel grids.

All distances are measured between voxel centers and kept as *squared*
integer values in voxel units; conversion to physical units happens only
at the API boundary (multiply by ``h``).  Erosion keeps a voxel when its
squared distance to the background is strictly greater than ``(r/h)^2``,
dilation reaches voxels at squared distance at most ``(r/h)^2``; with both
conventions ``r = 0`` is the identity and erode/dilate form an adjoint
pair on the grid.  Voxels outside the stored grid count as background for
erosion and as non-seeds for dilation, so callers are expected to supply
plus-sampling margins around any window whose values they care about.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .grid import VoxelGrid, WindowSpec

# Sentinel squared distance for "no seed reachable"; large enough to stay
# clear of any real value, small enough to survive additions in int64.
UNREACHABLE = np.int64(2) ** 62


@dataclass(frozen=True)
class DistanceField:
    """Per-voxel squared Euclidean distance (voxel units) to a seed set."""

    sqdist: np.ndarray  # int64, shape (nx, ny, nz)
    h: float = 1.0

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.sqdist.shape

    def distances(self) -> np.ndarray:
        """Physical distances as float64, with +inf on unreachable voxels."""
        out = np.sqrt(self.sqdist.astype(np.float64)) * self.h
        out[self.sqdist >= UNREACHABLE] = np.inf
        return out


@dataclass(frozen=True)
class RadiusProfile:
    """Foreground volume inside a core window as a function of ball radius."""

    radii: np.ndarray        # physical radii, strictly increasing
    volumes: np.ndarray      # foreground voxel counts in the core window
    window_voxels: int       # total voxel count of the core window

    def __post_init__(self):
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")

    def to_csv(self) -> str:
        lines = ["r,volume_voxels,volume_fraction"]
        for r, v in zip(self.radii, self.volumes):
            lines.append(f"{r:.9g},{int(v)},{float(v / self.window_voxels)!r}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Exact squared EDT: lower-envelope-of-parabolas passes, one per axis
# ---------------------------------------------------------------------------


@njit(cache=True)
def _edt_lines(f):  # pragma: no cover - compiled
    """1D squared-distance transform of every row of a 2D int64 array.

    Row values are sampled costs (0 on seeds, UNREACHABLE off-seed on the
    first pass; finite squared distances afterwards).  Rows with no finite
    entry stay UNREACHABLE.
    """
    rows, n = f.shape
    v = np.empty(n, np.int64)
    z = np.empty(n + 1, np.float64)
    d = np.empty(n, np.int64)
    for r in range(rows):
        line = f[r]
        k = -1
        for q in range(n):
            fq = line[q]
            if fq >= UNREACHABLE:
                continue
            if k >= 0:
                s = (fq + q * q - (line[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
                while s <= z[k]:
                    k -= 1
                    s = (fq + q * q - (line[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
                k += 1
            else:
                k = 0
                s = -1e30
            v[k] = q
            z[k] = s
            z[k + 1] = 1e30
        if k < 0:
            for q in range(n):
                d[q] = UNREACHABLE
        else:
            k = 0
            for q in range(n):
                while z[k + 1] < q:
                    k += 1
                dq = q - v[k]
                d[q] = dq * dq + line[v[k]]
        line[:] = d


def _edt_pass(work: np.ndarray, axis: int) -> np.ndarray:
    moved = np.ascontiguousarray(np.moveaxis(work, axis, -1))
    shape = moved.shape
    _edt_lines(moved.reshape(-1, shape[-1]))
    return np.moveaxis(moved, -1, axis)


def edt_squared_mask(seed_mask: np.ndarray) -> np.ndarray:
    """Exact squared EDT (int64, voxel units) to the True voxels of a mask."""
    work = np.where(seed_mask, np.int64(0), UNREACHABLE)
    for axis in (0, 1, 2):
        work = _edt_pass(work, axis)
    return np.ascontiguousarray(work)


def edt_squared(grid: VoxelGrid, seeds: str = "foreground") -> DistanceField:
    """Exact squared EDT to the nearest seed voxel center.

    ``seeds`` selects which voxels act as seeds: the grid's foreground or
    its background.  With no seed voxel at all every entry is the
    UNREACHABLE sentinel.
    """
    if seeds == "foreground":
        mask = grid.data
    elif seeds == "background":
        mask = ~grid.data
    else:
        raise ValueError(f"seeds must be 'foreground' or 'background', got {seeds!r}")
    return DistanceField(edt_squared_mask(mask), h=grid.h)


def border_sqdist(dims: tuple[int, int, int]) -> np.ndarray:
    """Squared distance from each voxel to the nearest out-of-grid voxel center."""
    nx, ny, nz = dims
    x = np.minimum(np.arange(nx) + 1, nx - np.arange(nx))
    y = np.minimum(np.arange(ny) + 1, ny - np.arange(ny))
    z = np.minimum(np.arange(nz) + 1, nz - np.arange(nz))
    m = np.minimum(np.minimum(x[:, None, None], y[None, :, None]), z[None, None, :])
    return m.astype(np.int64) ** 2


def erosion_sqdist(grid: VoxelGrid) -> np.ndarray:
    """Effective squared distance to background, counting out-of-grid as background."""
    d = edt_squared_mask(~grid.data)
    return np.minimum(d, border_sqdist(grid.dims))


def sq_threshold(r: float, h: float) -> int:
    """Integer squared-radius threshold for a physical radius.

    Tolerates the float round trip of candidate radii ``sqrt(m)*h``.
    """
    if r < 0:
        raise ValueError(f"radius must be non-negative, got {r}")
    return int(np.floor((r / h) ** 2 + 1e-9))


def eroded_mask(data: np.ndarray, eff_sqdist: np.ndarray, m: int) -> np.ndarray:
    return data & (eff_sqdist > m)


def dilated_mask(data: np.ndarray, m: int) -> np.ndarray:
    if m == 0 or not data.any():
        return data.copy()
    return edt_squared_mask(data) <= m


def erode(grid: VoxelGrid, r: float) -> VoxelGrid:
    """Erosion by a closed ball of physical radius r."""
    m = sq_threshold(r, grid.h)
    if m == 0:
        return grid
    return VoxelGrid(eroded_mask(grid.data, erosion_sqdist(grid), m), h=grid.h)


def dilate(grid: VoxelGrid, r: float) -> VoxelGrid:
    """Dilation by a closed ball of physical radius r (within the stored grid)."""
    m = sq_threshold(r, grid.h)
    return VoxelGrid(dilated_mask(grid.data, m), h=grid.h)


def opening(grid: VoxelGrid, r: float) -> VoxelGrid:
    """Morphological opening: erosion then dilation by the same ball."""
    return dilate(erode(grid, r), r)


def realized_thresholds(data: np.ndarray, eff_sqdist: np.ndarray) -> np.ndarray:
    """Sorted integer thresholds at which the eroded set changes, plus 0.

    These are the squared-EDT values realized on the foreground; between
    consecutive thresholds the eroded set is constant, so radius searches
    over ``sqrt(m)*h`` candidates are exact on the grid.
    """
    vals = np.unique(eff_sqdist[data])
    return np.union1d(vals, np.int64(0))


def opening_volume_profile(grid: VoxelGrid, w: WindowSpec, radii) -> RadiusProfile:
    """Opened-phase volume inside the core window for each radius.

    The opening runs over the full stored grid; only the core window is
    counted.  This is the measurement behind the r_max search.
    """
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be sorted strictly ascending")
    w.validate_for(grid.dims)
    core = w.core_slices()
    eff = erosion_sqdist(grid)
    volumes = np.empty(len(radii), dtype=np.int64)
    for i, r in enumerate(radii):
        m = sq_threshold(r, grid.h)
        opened = dilated_mask(eroded_mask(grid.data, eff, m), m)
        volumes[i] = int(opened[core].sum())
    total = int(np.prod([s.stop - s.start for s in core]))
    return RadiusProfile(radii=radii, volumes=volumes, window_voxels=total)
