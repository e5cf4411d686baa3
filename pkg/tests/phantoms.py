"""Structured test volumes: slabs, channels, necked channels."""

from __future__ import annotations

import numpy as np

from geotort.grid import VoxelGrid, WindowSpec


def slab(thickness, lateral=16, depth=20, z0=4):
    data = np.zeros((lateral, lateral, depth), dtype=bool)
    data[:, :, z0:z0 + thickness] = True
    return VoxelGrid(data)


def channel(side, grid_lat=17, depth=20):
    lo = (grid_lat - side) // 2
    data = np.zeros((grid_lat, grid_lat, depth), dtype=bool)
    data[lo:lo + side, lo:lo + side, :] = True
    return VoxelGrid(data)


def necked_channel(side, neck, depth=26, grid_lat=17):
    lo = (grid_lat - side) // 2
    nlo = (grid_lat - neck) // 2
    third = depth // 3
    data = np.zeros((grid_lat, grid_lat, depth), dtype=bool)
    data[lo:lo + side, lo:lo + side, :third] = True
    data[nlo:nlo + neck, nlo:nlo + neck, third:2 * third] = True
    data[lo:lo + side, lo:lo + side, 2 * third:] = True
    return VoxelGrid(data)


def window_for(grid, lateral=9, margin=4, height_n=11, oz=4):
    nx, _, _ = grid.dims
    lo = (nx - lateral) // 2
    return WindowSpec(
        lateral=(lateral, lateral), height_n=height_n, origin=(lo, lo, oz),
        margin_lateral=margin, margin_below=min(margin, oz),
    )
