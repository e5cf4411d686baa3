"""26-connectivity component labeling and inlet-connected phase extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import VoxelGrid, WindowSpec

_STRUCTURE_26 = np.ones((3, 3, 3), dtype=bool)


@dataclass(frozen=True)
class LabelField:
    """Per-voxel component ids (0 = background), labels dense in 1..count.

    Labels are canonical: component ids are assigned by first occurrence in
    linear-index order (x fastest), so any labeling backend or scan order
    yields the identical field.
    """

    labels: np.ndarray  # int32, shape (nx, ny, nz)
    count: int

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.labels.shape


def _canonicalize(raw: np.ndarray, count: int) -> np.ndarray:
    if count == 0:
        return raw.astype(np.int32)
    flat = raw.ravel(order="F")
    uniq, first = np.unique(flat[flat != 0], return_index=True)
    lut = np.zeros(count + 1, dtype=np.int32)
    lut[uniq[np.argsort(first)]] = np.arange(1, count + 1, dtype=np.int32)
    return lut[raw]


def label_components_26(grid: VoxelGrid) -> LabelField:
    """Label 26-connected foreground components."""
    raw, count = ndimage.label(grid.data, structure=_STRUCTURE_26)
    return LabelField(labels=_canonicalize(raw, count), count=int(count))


def inlet_connected_mask(data: np.ndarray, inlet_z: int) -> np.ndarray:
    """Union of 26-components touching the foreground of slice ``z = inlet_z``."""
    raw, count = ndimage.label(data, structure=_STRUCTURE_26)
    if count == 0:
        return np.zeros_like(data)
    inlet_labels = np.unique(raw[:, :, inlet_z])
    lut = np.zeros(count + 1, dtype=bool)
    lut[inlet_labels] = True
    lut[0] = False
    return lut[raw]


def inlet_connected(grid: VoxelGrid, w: WindowSpec) -> VoxelGrid:
    """Subset of the phase connected to the inlet plane of the window.

    Components are computed over the full stored grid (margins included);
    a component is kept when it has a foreground voxel anywhere on the
    inlet slice.
    """
    w.validate_for(grid.dims)
    return VoxelGrid(inlet_connected_mask(grid.data, w.inlet_z), h=grid.h)
