"""Mean geodesic tortuosity on the voxel graph.

Foreground voxels inside the dilated analysis window form a graph whose
edges join 26-neighbors with weights equal to the center distance
(``h``, ``h*sqrt(2)`` or ``h*sqrt(3)``).  One multi-source Dijkstra run
seeded from the outlet plane yields, for every voxel, the length of the
shortest admissible path to the outlet; this regroups the per-inlet-voxel
shortest-path sums exactly.  Heap ties break on the voxel linear index so
the traversal order is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .grid import VoxelGrid, WindowSpec


@njit(inline="always")
def _heap_less(dist, a, b):  # pragma: no cover - compiled
    da = dist[a]
    db = dist[b]
    return da < db or (da == db and a < b)


@njit(cache=True)
def _sift_up(heap, pos, dist, i):  # pragma: no cover - compiled
    node = heap[i]
    while i > 0:
        parent = (i - 1) >> 1
        p = heap[parent]
        if _heap_less(dist, node, p):
            heap[i] = p
            pos[p] = i
            i = parent
        else:
            break
    heap[i] = node
    pos[node] = i


@njit(cache=True)
def _sift_down(heap, pos, dist, size, i):  # pragma: no cover - compiled
    node = heap[i]
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        right = child + 1
        if right < size and _heap_less(dist, heap[right], heap[child]):
            child = right
        if _heap_less(dist, heap[child], node):
            heap[i] = heap[child]
            pos[heap[i]] = i
            i = child
        else:
            break
    heap[i] = node
    pos[node] = i


@njit(cache=True)
def _multi_source_dijkstra(fg, seeds, w1, w2, w3):  # pragma: no cover - compiled
    """Shortest path length from every voxel to the seed set.

    fg: 3D bool admissible mask; seeds: sorted flat indices (x fastest).
    Returns a flat float64 array, +inf on unreachable or background voxels.
    """
    nx, ny, nz = fg.shape
    n = nx * ny * nz
    dist = np.full(n, np.inf, np.float64)
    heap = np.empty(n, np.int64)
    pos = np.full(n, -1, np.int64)  # -1 never queued, -2 finalized
    size = 0
    for s in seeds:
        dist[s] = 0.0
        heap[size] = s
        pos[s] = size
        size += 1
        _sift_up(heap, pos, dist, size - 1)
    while size > 0:
        u = heap[0]
        size -= 1
        last = heap[size]
        heap[0] = last
        pos[last] = 0
        if size > 0:
            _sift_down(heap, pos, dist, size, 0)
        pos[u] = -2
        ux = u % nx
        uy = (u // nx) % ny
        uz = u // (nx * ny)
        du = dist[u]
        for dz in range(-1, 2):
            vz = uz + dz
            if vz < 0 or vz >= nz:
                continue
            for dy in range(-1, 2):
                vy = uy + dy
                if vy < 0 or vy >= ny:
                    continue
                for dx in range(-1, 2):
                    if dx == 0 and dy == 0 and dz == 0:
                        continue
                    vx = ux + dx
                    if vx < 0 or vx >= nx:
                        continue
                    if not fg[vx, vy, vz]:
                        continue
                    v = vx + nx * (vy + ny * vz)
                    if pos[v] == -2:
                        continue
                    k = abs(dx) + abs(dy) + abs(dz)
                    if k == 1:
                        nd = du + w1
                    elif k == 2:
                        nd = du + w2
                    else:
                        nd = du + w3
                    if nd < dist[v]:
                        dist[v] = nd
                        if pos[v] == -1:
                            heap[size] = v
                            pos[v] = size
                            size += 1
                            _sift_up(heap, pos, dist, size - 1)
                        else:
                            _sift_up(heap, pos, dist, pos[v])
    return dist


@dataclass(frozen=True)
class PathLengthField:
    """Shortest physical path length to the outlet, over the dilated window.

    ``values[x, y, z]`` indexes the dilated window block; ``origin`` is the
    block's offset inside the stored grid.  Background and unreachable
    voxels hold +inf; outlet target voxels hold 0.
    """

    values: np.ndarray  # float64 over the dilated window
    origin: tuple[int, int, int]
    window: WindowSpec
    h: float

    def core_inlet_values(self) -> np.ndarray:
        """Values on the core inlet plane, shape (wx, wy)."""
        m = self.window.margin_lateral
        mb = self.window.margin_below
        wx, wy = self.window.lateral
        return self.values[m:m + wx, m:m + wy, mb]


@dataclass(frozen=True)
class TortuosityResult:
    """Mean geodesic tortuosity estimate and its bookkeeping."""

    tau_hat: float
    connected_inlet_count: int
    inlet_count: int
    l: float
    h: float
    window: WindowSpec


def shortest_path_field(grid: VoxelGrid, w: WindowSpec) -> PathLengthField:
    """Multi-source Dijkstra from the outlet plane through the dilated window.

    Sources are all foreground voxels of the outlet slice (core plus
    lateral margins); the graph is restricted to foreground voxels of the
    dilated window.
    """
    w.validate_for(grid.dims)
    sl = w.dilated_slices()
    sub = np.ascontiguousarray(grid.data[sl])
    nx, ny, _ = sub.shape
    wrel = w.relative_to_dilated()
    xs, ys = np.nonzero(sub[:, :, wrel.outlet_z])
    seeds = np.sort(xs + nx * (ys + ny * wrel.outlet_z)).astype(np.int64)
    h = grid.h
    flat = _multi_source_dijkstra(sub, seeds, h, h * math.sqrt(2.0), h * math.sqrt(3.0))
    values = flat.reshape(sub.shape, order="F")
    return PathLengthField(
        values=values,
        origin=(sl[0].start, sl[1].start, sl[2].start),
        window=w,
        h=h,
    )


def tortuosity_estimate(grid: VoxelGrid, w: WindowSpec) -> TortuosityResult:
    """Mean shortest-path length from the core inlet to the outlet, over l.

    Averages over the inlet foreground voxels that reach the outlet; if
    none does the estimate is +inf (minimum over an empty set).
    """
    field = shortest_path_field(grid, w)
    inlet_vals = field.core_inlet_values()
    sub_inlet_fg = grid.data[w.core_slices()][:, :, 0]
    inlet_count = int(sub_inlet_fg.sum())
    finite = inlet_vals[sub_inlet_fg & np.isfinite(inlet_vals)]
    l = w.transport_length(grid.h)
    if finite.size == 0:
        return TortuosityResult(
            tau_hat=math.inf,
            connected_inlet_count=0,
            inlet_count=inlet_count,
            l=l,
            h=grid.h,
            window=w,
        )
    tau = float(finite.mean() / l)
    return TortuosityResult(
        tau_hat=tau,
        connected_inlet_count=int(finite.size),
        inlet_count=inlet_count,
        l=l,
        h=grid.h,
        window=w,
    )
