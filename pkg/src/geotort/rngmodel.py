"""Multi-phase microstructure generation.

Each phase is the Voronoi mollification of a relative neighborhood graph
(RNG) built on an independent homogeneous Poisson point process: a voxel
belongs to phase i when its distance to graph i is minimal over all
graphs.  Two points x, y are RNG-adjacent when no third point z satisfies
``max(|x-z|, |y-z|) <= |x-y|`` (equality blocks; with continuous
coordinates ties have probability zero).

Point processes are sampled in a box that exceeds the voxelized volume by
a physical margin, so graph edges near the volume boundary see the same
point environment as interior ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .grid import PhaseVolume
from .morph import edt_squared_mask


@dataclass(frozen=True)
class Box:
    """Axis-aligned physical box [lo, hi]."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if any(b < a for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"box upper corner below lower corner: {self}")

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in zip(self.lo, self.hi))

    def expanded(self, margin: float) -> "Box":
        return Box(
            lo=tuple(a - margin for a in self.lo),
            hi=tuple(b + margin for b in self.hi),
        )


@dataclass(frozen=True, eq=False)
class PointProcessSample:
    """Realization of one phase's Poisson point process."""

    phase: int
    intensity: float
    box: Box
    points: np.ndarray  # (n, 3) float64
    seed: object = None  # whatever was fed to the generator


@dataclass(frozen=True, eq=False)
class GeometricGraph:
    """Finite geometric graph: vertex coordinates plus undirected edges (a < b)."""

    vertices: np.ndarray  # (n, 3) float64
    edges: np.ndarray     # (m, 2) int64

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.vertex_count, dtype=np.int64)
        np.add.at(deg, self.edges.ravel(), 1)
        return deg


def sample_poisson(intensity: float, box: Box, seed, phase: int = 1) -> PointProcessSample:
    """Homogeneous Poisson process: Poisson(intensity*volume) i.i.d. uniform points."""
    if not intensity > 0:
        raise ValueError(f"intensity must be positive, got {intensity}")
    vol = box.volume
    if not vol > 0:
        raise ValueError(f"box volume must be positive, got {vol}")
    rng = np.random.default_rng(seed)
    count = int(rng.poisson(intensity * vol))
    pts = rng.uniform(np.asarray(box.lo), np.asarray(box.hi), size=(count, 3))
    return PointProcessSample(
        phase=phase,
        intensity=intensity,
        box=box,
        points=np.ascontiguousarray(pts),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Relative neighborhood graph
# ---------------------------------------------------------------------------


@njit(cache=True)
def _blocker_in_cells(pts, starts, order, ncx, ncy, x0, x1, y0, y1, z0, z1,
                      i, j, d2):  # pragma: no cover - compiled
    pix, piy, piz = pts[i, 0], pts[i, 1], pts[i, 2]
    pjx, pjy, pjz = pts[j, 0], pts[j, 1], pts[j, 2]
    for cx in range(x0, x1 + 1):
        for cy in range(y0, y1 + 1):
            for cz in range(z0, z1 + 1):
                cid = cx + ncx * (cy + ncy * cz)
                for t in range(starts[cid], starts[cid + 1]):
                    z = order[t]
                    if z == i or z == j:
                        continue
                    ax = pts[z, 0] - pix
                    ay = pts[z, 1] - piy
                    az = pts[z, 2] - piz
                    if ax * ax + ay * ay + az * az > d2:
                        continue
                    bx = pts[z, 0] - pjx
                    by = pts[z, 1] - pjy
                    bz = pts[z, 2] - pjz
                    if bx * bx + by * by + bz * bz <= d2:
                        return True
    return False


@njit(cache=True)
def _rng_edges(pts, starts, order, ncx, ncy, ncz, lox, loy, loz, cell,
               out):  # pragma: no cover - compiled
    """Fill `out` with RNG edge index pairs; returns count, or -1 on overflow.

    For every point pair the lune is scanned for blockers through the
    spatial hash: first the 3x3x3 cell block around the pair midpoint
    (where a blocker is most likely), then the full cell range covered by
    the lune's bounding box.
    """
    n = pts.shape[0]
    cap = out.shape[0]
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = pts[j, 0] - pts[i, 0]
            dy = pts[j, 1] - pts[i, 1]
            dz = pts[j, 2] - pts[i, 2]
            d2 = dx * dx + dy * dy + dz * dz
            d = math.sqrt(d2)
            # lune bounding box: intersection of the two radius-d ball boxes
            bx0 = max(pts[i, 0], pts[j, 0]) - d
            bx1 = min(pts[i, 0], pts[j, 0]) + d
            by0 = max(pts[i, 1], pts[j, 1]) - d
            by1 = min(pts[i, 1], pts[j, 1]) + d
            bz0 = max(pts[i, 2], pts[j, 2]) - d
            bz1 = min(pts[i, 2], pts[j, 2]) + d
            cx0 = max(0, int((bx0 - lox) / cell))
            cx1 = min(ncx - 1, int((bx1 - lox) / cell))
            cy0 = max(0, int((by0 - loy) / cell))
            cy1 = min(ncy - 1, int((by1 - loy) / cell))
            cz0 = max(0, int((bz0 - loz) / cell))
            cz1 = min(ncz - 1, int((bz1 - loz) / cell))
            mx = 0.5 * (pts[i, 0] + pts[j, 0])
            my = 0.5 * (pts[i, 1] + pts[j, 1])
            mz = 0.5 * (pts[i, 2] + pts[j, 2])
            cmx = min(max(int((mx - lox) / cell), 0), ncx - 1)
            cmy = min(max(int((my - loy) / cell), 0), ncy - 1)
            cmz = min(max(int((mz - loz) / cell), 0), ncz - 1)
            blocked = _blocker_in_cells(
                pts, starts, order, ncx, ncy,
                max(cx0, cmx - 1), min(cx1, cmx + 1),
                max(cy0, cmy - 1), min(cy1, cmy + 1),
                max(cz0, cmz - 1), min(cz1, cmz + 1),
                i, j, d2,
            )
            if not blocked:
                blocked = _blocker_in_cells(
                    pts, starts, order, ncx, ncy,
                    cx0, cx1, cy0, cy1, cz0, cz1, i, j, d2,
                )
            if not blocked:
                if count >= cap:
                    return -1
                out[count, 0] = i
                out[count, 1] = j
                count += 1
    return count


def build_rng_graph(points) -> GeometricGraph:
    """Relative neighborhood graph of a finite point set.

    Matches the brute-force definition exactly: an edge survives iff no
    other point blocks it under the (non-strict) lune test.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got shape {pts.shape}")
    n = pts.shape[0]
    if n != np.unique(pts, axis=0).shape[0]:
        raise ValueError("points must be pairwise distinct")
    if n < 2:
        return GeometricGraph(vertices=pts, edges=np.empty((0, 2), dtype=np.int64))

    lo = pts.min(axis=0)
    extent = pts.max(axis=0) - lo
    cell = max(float(extent.max()) / max(1.0, n ** (1.0 / 3.0)), 1e-9)
    nc = np.maximum(1, np.floor(extent / cell).astype(np.int64) + 1)
    ncx, ncy, ncz = int(nc[0]), int(nc[1]), int(nc[2])
    cells = np.minimum(np.floor((pts - lo) / cell).astype(np.int64), nc - 1)
    cell_ids = cells[:, 0] + ncx * (cells[:, 1] + ncy * cells[:, 2])
    order = np.argsort(cell_ids, kind="stable").astype(np.int64)
    starts = np.zeros(ncx * ncy * ncz + 1, dtype=np.int64)
    np.add.at(starts, cell_ids + 1, 1)
    starts = np.cumsum(starts)

    cap = 16 * n + 64
    while True:
        out = np.empty((cap, 2), dtype=np.int64)
        count = _rng_edges(
            pts, starts, order, ncx, ncy, ncz,
            float(lo[0]), float(lo[1]), float(lo[2]), cell, out,
        )
        if count >= 0:
            return GeometricGraph(vertices=pts, edges=out[:count].copy())
        cap *= 2


# ---------------------------------------------------------------------------
# Voronoi mollification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MollificationSpec:
    """Target lattice and per-phase skeleton graphs for mollification."""

    graphs: tuple[GeometricGraph, ...]
    dims: tuple[int, int, int]
    h: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    spacing: float | None = None  # edge sample spacing, default h/2

    def __post_init__(self):
        if len(self.graphs) < 1:
            raise ValueError("need at least one phase graph")
        for i, g in enumerate(self.graphs):
            if g.vertex_count == 0:
                raise ValueError(f"phase {i + 1} graph has no vertices")
        if not self.h > 0:
            raise ValueError("h must be positive")
        sp = self.edge_spacing
        if not 0 < sp <= self.h / 2 + 1e-12:
            raise ValueError(f"edge spacing must be in (0, h/2], got {sp}")

    @property
    def edge_spacing(self) -> float:
        return self.h / 2 if self.spacing is None else self.spacing

    @property
    def phase_count(self) -> int:
        return len(self.graphs)


@dataclass(frozen=True, eq=False)
class MollifiedVolume:
    labels: PhaseVolume
    phase_sqdist: np.ndarray | None  # (k, nx, ny, nz) int64, voxel units


def _graph_sample_points(g: GeometricGraph, spacing: float) -> np.ndarray:
    chunks = [g.vertices]
    for a, b in g.edges:
        pa, pb = g.vertices[a], g.vertices[b]
        length = float(np.linalg.norm(pb - pa))
        npts = max(2, int(math.ceil(length / spacing)) + 1)
        ts = np.linspace(0.0, 1.0, npts)[1:-1, None]  # endpoints are vertices
        if ts.size:
            chunks.append(pa + ts * (pb - pa))
    return np.concatenate(chunks, axis=0)


def voxelize_mollification(spec: MollificationSpec, keep_distances: bool = False) -> MollifiedVolume:
    """Rasterize each graph, compute per-phase EDTs, assign nearest-phase labels.

    Edges are sampled at the configured spacing and stamped onto the nearest
    voxel centers of a lattice extended to cover every graph vertex, so
    graph parts outside the target volume still shape the distances
    inside.  A voxel gets label i when its distance to graph i is <= the
    distance to every other graph; exact ties go to the smallest index.
    """
    h = spec.h
    dims = np.asarray(spec.dims, dtype=np.int64)
    origin = np.asarray(spec.origin, dtype=np.float64)

    vmin = np.min([g.vertices.min(axis=0) for g in spec.graphs], axis=0)
    vmax = np.max([g.vertices.max(axis=0) for g in spec.graphs], axis=0)
    pad_lo = np.maximum(0, np.ceil((origin - vmin) / h).astype(np.int64))
    top = origin + (dims - 1) * h
    pad_hi = np.maximum(0, np.ceil((vmax - top) / h).astype(np.int64))
    ext_dims = tuple(int(v) for v in dims + pad_lo + pad_hi)
    ext_origin = origin - pad_lo * h
    crop = tuple(slice(int(p), int(p + d)) for p, d in zip(pad_lo, dims))

    sq = np.empty((spec.phase_count, *spec.dims), dtype=np.int64)
    for k, g in enumerate(spec.graphs):
        seeds = np.zeros(ext_dims, dtype=bool)
        samples = _graph_sample_points(g, spec.edge_spacing)
        idx = np.rint((samples - ext_origin) / h).astype(np.int64)
        idx = np.clip(idx, 0, np.asarray(ext_dims) - 1)
        seeds[idx[:, 0], idx[:, 1], idx[:, 2]] = True
        sq[k] = edt_squared_mask(seeds)[crop]

    labels = (np.argmin(sq, axis=0) + 1).astype(np.uint8)
    volume = PhaseVolume(labels, h=h, phase_count=spec.phase_count)
    return MollifiedVolume(labels=volume, phase_sqdist=sq if keep_distances else None)


def tie_inclusive_masks(mol: MollifiedVolume) -> list[np.ndarray]:
    """Per-phase masks with boundary ties included: d_i <= min_j d_j."""
    if mol.phase_sqdist is None:
        raise ValueError("mollification was computed without keep_distances=True")
    dmin = mol.phase_sqdist.min(axis=0)
    return [np.ascontiguousarray(mol.phase_sqdist[k] <= dmin)
            for k in range(mol.phase_sqdist.shape[0])]


# ---------------------------------------------------------------------------
# End-to-end generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GenerationResult:
    volume: PhaseVolume
    graphs: tuple[GeometricGraph, ...]
    samples: tuple[PointProcessSample, ...]


def lattice_dims(box: Box, h: float) -> tuple[int, int, int]:
    """Number of lattice points of spacing h inside the box, per axis."""
    return tuple(int(math.floor((b - a) / h + 1e-9)) + 1 for a, b in zip(box.lo, box.hi))


def generate_multiphase(
    intensities,
    box: Box,
    h: float,
    seed: int,
    point_margin: float = 50.0,
    spacing: float | None = None,
) -> GenerationResult:
    """Sample k Poisson processes, build their RNGs, voxelize the mollification.

    ``box`` is the physical extent of the voxelized volume; points are
    sampled in ``box.expanded(point_margin)`` to suppress edge effects of
    the graph construction near the volume boundary.
    """
    intensities = tuple(float(v) for v in intensities)
    if len(intensities) < 1:
        raise ValueError("need at least one intensity")
    children = np.random.SeedSequence(seed).spawn(len(intensities))
    gen_box = box.expanded(point_margin)
    samples = tuple(
        sample_poisson(lam, gen_box, child, phase=i + 1)
        for i, (lam, child) in enumerate(zip(intensities, children))
    )
    graphs = tuple(build_rng_graph(s.points) for s in samples)
    spec = MollificationSpec(
        graphs=graphs,
        dims=lattice_dims(box, h),
        h=h,
        origin=box.lo,
        spacing=spacing,
    )
    mol = voxelize_mollification(spec)
    return GenerationResult(volume=mol.labels, graphs=graphs, samples=samples)
