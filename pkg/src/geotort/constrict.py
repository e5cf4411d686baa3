"""Volume fraction, characteristic radii r_max / r_min, and constrictivity.

Both radii are "largest radius keeping at least half the phase volume"
estimates over a core window: r_max uses the plain morphological opening
(typical phase thickness), r_min uses the intrusion set -- the dilation of
the inlet-connected part of the eroded phase (bottleneck radius when
entering from the inlet plane).  Constrictivity is ``(r_min/r_max)^2``.

Erosion and dilation always run on the full stored grid (out-of-grid
voxels are background), and predicate volumes count core-window voxels
only.  The two radii differ in how they use the window: r_max needs no
connectivity, so only its volume count is windowed; for r_min the
inlet-connected part of the eroded phase is determined within the dilated
window (core plus plus-sampling margins), since connectivity to the inlet
cannot be traced through unobserved territory.  That confinement is what
makes r_min margin-sensitive.

The continuum supremum over radii reduces to the largest candidate radius
``sqrt(m)*h`` over the squared-EDT values m realized on the phase, since
the eroded set is constant between consecutive candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .connect import inlet_connected_mask
from .grid import UndefinedEstimateError, VoxelGrid, WindowSpec
from .morph import (
    RadiusProfile,
    dilated_mask,
    eroded_mask,
    erosion_sqdist,
    realized_thresholds,
    sq_threshold,
)


@dataclass(frozen=True)
class IntrusionSet:
    """Mask of the phase reachable by a ball of radius r rolling in from the inlet."""

    mask: np.ndarray  # bool, dims of the stored grid
    r: float


@dataclass(frozen=True)
class ConstrictivityResult:
    """Constrictivity and its ingredient estimates for one window."""

    p_hat: float
    r_min_hat: float  # -inf when even r=0 fails the half-volume predicate
    r_max_hat: float
    beta_hat: float
    window: WindowSpec
    dimension_exponent: int = 2

    @property
    def inlet_connected(self) -> bool:
        return self.r_min_hat != -math.inf


def volume_fraction(grid: VoxelGrid, w: WindowSpec) -> float:
    """Foreground fraction of the core window."""
    w.validate_for(grid.dims)
    core = grid.data[w.core_slices()]
    return float(core.sum() / core.size)


def _largest_true(cands: np.ndarray, pred) -> int | None:
    """Largest candidate with a true predicate, by binary search.

    Assumes the predicate is non-increasing along the candidates and that
    it holds at ``cands[0]``.  Returns None when it fails even there.
    """
    if not pred(cands[0]):
        return None
    lo = 0
    hi = len(cands) - 1
    if pred(cands[hi]):
        return int(cands[hi])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(cands[mid]):
            lo = mid
        else:
            hi = mid
    return int(cands[lo])


def _dilated_core_count(support: np.ndarray, core, m: int, dims) -> int:
    """Core-window voxel count of support dilated by sqrt(m).

    Support farther than sqrt(m) from the core cannot reach it, so the
    dilation runs on a cropped box around the core; the count is exact.
    """
    pad = math.isqrt(m) + 1
    box = tuple(
        slice(max(0, c.start - pad), min(n, c.stop + pad)) for c, n in zip(core, dims)
    )
    dilated = dilated_mask(np.ascontiguousarray(support[box]), m)
    core_rel = tuple(slice(c.start - b.start, c.stop - b.start) for c, b in zip(core, box))
    return int(dilated[core_rel].sum())


def _intrusion_support(grid: VoxelGrid, w: WindowSpec, eff: np.ndarray, m: int) -> np.ndarray:
    """Inlet-connected part of the eroded phase, confined to the dilated window."""
    block = w.dilated_slices()
    eroded = np.ascontiguousarray(eroded_mask(grid.data, eff, m)[block])
    inlet_z_rel = w.inlet_z - block[2].start
    connected = inlet_connected_mask(eroded, inlet_z_rel)
    support = np.zeros(grid.dims, dtype=bool)
    support[block] = connected
    return support


def _phase_volume(grid: VoxelGrid, w: WindowSpec, what: str) -> int:
    vol = int(grid.data[w.core_slices()].sum())
    if vol == 0:
        raise UndefinedEstimateError(f"undefined {what}: empty phase in the core window")
    return vol


def estimate_r_max(grid: VoxelGrid, w: WindowSpec, _eff: np.ndarray | None = None) -> float:
    """Largest candidate radius whose opening keeps >= half the core phase volume."""
    w.validate_for(grid.dims)
    phase_vol = _phase_volume(grid, w, "r_max")
    eff = erosion_sqdist(grid) if _eff is None else _eff
    cands = realized_thresholds(grid.data, eff)
    core = w.core_slices()

    def pred(m):
        eroded = eroded_mask(grid.data, eff, m)
        return 2 * _dilated_core_count(eroded, core, m, grid.dims) >= phase_vol

    best = _largest_true(cands, pred)
    # m = 0 keeps the phase unchanged, so the predicate always holds there.
    assert best is not None
    return math.sqrt(best) * grid.h


def estimate_r_min(grid: VoxelGrid, w: WindowSpec, _eff: np.ndarray | None = None) -> float:
    """Largest candidate radius whose intrusion set keeps >= half the core volume.

    Returns -inf when even the r=0 intrusion set (the inlet-connected
    phase) falls below half the phase volume.
    """
    w.validate_for(grid.dims)
    phase_vol = _phase_volume(grid, w, "r_min")
    eff = erosion_sqdist(grid) if _eff is None else _eff
    cands = realized_thresholds(grid.data, eff)
    core = w.core_slices()

    def pred(m):
        support = _intrusion_support(grid, w, eff, m)
        return 2 * _dilated_core_count(support, core, m, grid.dims) >= phase_vol

    best = _largest_true(cands, pred)
    if best is None:
        return -math.inf
    return math.sqrt(best) * grid.h


def compute_intrusion_set(grid: VoxelGrid, w: WindowSpec, r: float) -> IntrusionSet:
    """Dilation by r of the inlet-connected part of the r-eroded phase.

    The erosion is taken on the full stored grid; connectivity to the
    inlet plane is traced within the dilated window.  The returned mask
    covers the stored grid.
    """
    m = sq_threshold(r, grid.h)
    w.validate_for(grid.dims)
    eff = erosion_sqdist(grid)
    support = _intrusion_support(grid, w, eff, m)
    return IntrusionSet(mask=dilated_mask(support, m), r=r)


def constrictivity(
    grid: VoxelGrid, w: WindowSpec, _eff: np.ndarray | None = None
) -> ConstrictivityResult:
    """Assemble p_hat, r_min, r_max and beta = (r_min/r_max)^2 for one window.

    An inlet-disconnected phase yields r_min = -inf and beta = 0 rather
    than an error, so batch runs over many realizations never abort.  In
    the degenerate case r_min = r_max = 0 beta is reported as 1.
    """
    p_hat = volume_fraction(grid, w)
    eff = erosion_sqdist(grid) if _eff is None else _eff
    r_max = estimate_r_max(grid, w, _eff=eff)
    r_min = estimate_r_min(grid, w, _eff=eff)
    if r_min == -math.inf:
        beta = 0.0
    elif r_max > 0:
        beta = (r_min / r_max) ** 2
    else:
        beta = 1.0 if r_min == 0 else 0.0
    return ConstrictivityResult(
        p_hat=p_hat, r_min_hat=r_min, r_max_hat=r_max, beta_hat=beta, window=w
    )


def intrusion_volume_profile(grid: VoxelGrid, w: WindowSpec, radii) -> RadiusProfile:
    """Intrusion-set volume inside the core window for each radius."""
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be sorted strictly ascending")
    w.validate_for(grid.dims)
    eff = erosion_sqdist(grid)
    core = w.core_slices()
    volumes = np.empty(len(radii), dtype=np.int64)
    for i, r in enumerate(radii):
        m = sq_threshold(r, grid.h)
        support = _intrusion_support(grid, w, eff, m)
        volumes[i] = _dilated_core_count(support, core, m, grid.dims)
    total = int(np.prod([s.stop - s.start for s in core]))
    return RadiusProfile(radii=radii, volumes=volumes, window_voxels=total)
