"""Structured fine grids and coarse block partitions.

Cells are indexed ``(i, j[, k])`` with the x index fastest; flat indices use
Fortran (column-major) raveling so flattened fields match the x-fastest file
layout of the permeability readers.  Faces are grouped by their normal axis,
and the face normal always points in the positive axis direction; outward
signs with respect to a cell or a block are applied on demand.
"""

from dataclasses import dataclass, field
from math import prod

import numpy as np


@dataclass(frozen=True)
class StructuredGrid:
    """Axis-aligned Cartesian mesh with uniform spacing per axis."""

    dims: tuple[int, ...]
    spacing: tuple[float, ...]

    def __post_init__(self):
        if len(self.dims) not in (2, 3):
            raise ValueError(f"grid must be 2D or 3D, got {len(self.dims)} axes")
        if len(self.spacing) != len(self.dims):
            raise ValueError("spacing must have one entry per axis")
        if any(int(n) != n or n < 1 for n in self.dims):
            raise ValueError(f"cell counts must be positive integers, got {self.dims}")
        if any(h <= 0 for h in self.spacing):
            raise ValueError(f"spacings must be positive, got {self.spacing}")
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def n_cells(self) -> int:
        return prod(self.dims)

    @property
    def cell_volume(self) -> float:
        return prod(self.spacing)

    def face_dims(self, axis: int) -> tuple[int, ...]:
        """Shape of the face array with normal along ``axis`` (one extra plane)."""
        return tuple(n + 1 if a == axis else n for a, n in enumerate(self.dims))

    def n_faces(self, axis: int) -> int:
        return prod(self.face_dims(axis))

    @property
    def total_faces(self) -> int:
        return sum(self.n_faces(a) for a in range(self.ndim))

    def face_area(self, axis: int) -> float:
        return self.cell_volume / self.spacing[axis]

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.dims[axis]) + 0.5) * h

    def cell_centers(self) -> list[np.ndarray]:
        """Per-axis center coordinate arrays broadcast to the full cell shape."""
        grids = np.meshgrid(*[self.axis_centers(a) for a in range(self.ndim)], indexing="ij")
        return list(grids)

    def zeros_cells(self) -> np.ndarray:
        return np.zeros(self.dims)

    def zeros_faces(self) -> list[np.ndarray]:
        return [np.zeros(self.face_dims(a)) for a in range(self.ndim)]


def build_grid(dims, spacing=None) -> StructuredGrid:
    """Create a grid from per-axis cell counts and optional spacings (default 1)."""
    dims = tuple(dims)
    if spacing is None:
        spacing = (1.0,) * len(dims)
    return StructuredGrid(dims, tuple(spacing))


@dataclass(frozen=True)
class Interface:
    """One coarse interface: a rectangle of fine faces shared by two blocks.

    ``plane`` is the fine-face plane index along ``axis``; ``lo``/``hi`` are the
    fine-cell index ranges over the transverse axes (in ascending axis order).
    ``block_minus`` is the block on the negative side of the plane.
    """

    index: int
    axis: int
    plane: int
    lo: tuple[int, ...]
    hi: tuple[int, ...]
    block_minus: int
    block_plus: int

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def n_faces(self) -> int:
        return prod(self.shape)


@dataclass(frozen=True)
class CoarsePartition:
    """Uniform coarse block partition of a structured grid.

    Blocks are boxes of ``ratio`` fine cells per axis; the interface list covers
    every interior fine face on the coarse skeleton exactly once, ordered by
    normal axis, then plane, then transverse position (x fastest).
    """

    grid: StructuredGrid
    ratio: int
    blocks_per_axis: tuple[int, ...]
    interfaces: tuple[Interface, ...] = field(repr=False)

    @property
    def ndim(self) -> int:
        return self.grid.ndim

    @property
    def n_blocks(self) -> int:
        return prod(self.blocks_per_axis)

    @property
    def n_interfaces(self) -> int:
        return len(self.interfaces)

    def block_position(self, block: int) -> tuple[int, ...]:
        return tuple(np.unravel_index(block, self.blocks_per_axis, order="F"))

    def block_id(self, position) -> int:
        return int(np.ravel_multi_index(tuple(position), self.blocks_per_axis, order="F"))

    def cell_slices(self, block: int) -> tuple[slice, ...]:
        pos = self.block_position(block)
        n = self.ratio
        return tuple(slice(p * n, (p + 1) * n) for p in pos)

    def block_index_map(self) -> np.ndarray:
        """Block id of every fine cell, shaped like the grid."""
        out = np.empty(self.grid.dims, dtype=np.int64)
        for b in range(self.n_blocks):
            out[self.cell_slices(b)] = b
        return out

    def side_interface(self, block: int, axis: int, high: bool) -> Interface | None:
        """Interface on one side of a block, or None for a domain-boundary side."""
        pos = self.block_position(block)
        key = list(pos)
        if high:
            if pos[axis] == self.blocks_per_axis[axis] - 1:
                return None
            key[axis] += 1
        elif pos[axis] == 0:
            return None
        lut = self._interface_lut[axis]
        return self.interfaces[lut[tuple(key)]]

    def block_sides(self, block: int):
        """All 2*ndim sides of a block as (axis, high, Interface-or-None)."""
        out = []
        for axis in range(self.ndim):
            for high in (False, True):
                out.append((axis, high, self.side_interface(block, axis, high)))
        return out

    @property
    def _interface_lut(self) -> list[np.ndarray]:
        # axis -> array indexed by the plus-side block position, value = interface index
        lut = getattr(self, "_lut_cache", None)
        if lut is None:
            lut = []
            for axis in range(self.ndim):
                shape = list(self.blocks_per_axis)
                arr = np.full(shape, -1, dtype=np.int64)
                lut.append(arr)
            for iface in self.interfaces:
                plus_pos = self.block_position(iface.block_plus)
                lut[iface.axis][plus_pos] = iface.index
            object.__setattr__(self, "_lut_cache", lut)
        return lut


def build_coarse_partition(grid: StructuredGrid, ratio: int) -> CoarsePartition:
    """Partition the grid into blocks of ``ratio`` cells per axis.

    Every axis must be divisible by ``ratio``; ragged blocks are rejected so
    that each interface stays a full rectangle of fine faces.
    """
    ratio = int(ratio)
    if ratio < 1:
        raise ValueError(f"coarsening ratio must be >= 1, got {ratio}")
    for a, n in enumerate(grid.dims):
        if n % ratio != 0:
            raise ValueError(
                f"axis {a} has {n} cells, not divisible by coarsening ratio {ratio}"
            )
    blocks_per_axis = tuple(n // ratio for n in grid.dims)

    interfaces = []
    nd = grid.ndim
    for axis in range(nd):
        t_axes = [a for a in range(nd) if a != axis]
        for ib in range(1, blocks_per_axis[axis]):
            plane = ib * ratio
            # transverse block positions, x-fastest
            t_shape = [blocks_per_axis[a] for a in t_axes]
            for flat in range(prod(t_shape)):
                t_pos = np.unravel_index(flat, t_shape, order="F")
                pos_minus = [0] * nd
                pos_minus[axis] = ib - 1
                for a, p in zip(t_axes, t_pos):
                    pos_minus[a] = int(p)
                pos_plus = list(pos_minus)
                pos_plus[axis] = ib
                lo = tuple(pos_minus[a] * ratio for a in t_axes)
                hi = tuple((pos_minus[a] + 1) * ratio for a in t_axes)
                interfaces.append(
                    Interface(
                        index=len(interfaces),
                        axis=axis,
                        plane=plane,
                        lo=lo,
                        hi=hi,
                        block_minus=int(np.ravel_multi_index(pos_minus, blocks_per_axis, order="F")),
                        block_plus=int(np.ravel_multi_index(pos_plus, blocks_per_axis, order="F")),
                    )
                )
    return CoarsePartition(grid, ratio, blocks_per_axis, tuple(interfaces))


def interface_trace_coordinates(partition: CoarsePartition, interface_id: int) -> np.ndarray:
    """Local [0,1] coordinates of fine-face centroids on one interface.

    Returns shape (m,) in 2D and (m, 2) in 3D, ordered like the interface's
    fine faces (first transverse axis fastest); the k-th of m face strips in a
    direction sits at (k + 0.5) / m.
    """
    iface = partition.interfaces[interface_id]
    coords = [(np.arange(m) + 0.5) / m for m in iface.shape]
    if len(coords) == 1:
        return coords[0]
    xi, eta = np.meshgrid(coords[0], coords[1], indexing="ij")
    return np.column_stack([xi.ravel(order="F"), eta.ravel(order="F")])


def interface_face_slab(grid: StructuredGrid, iface: Interface):
    """Index expression selecting an interface's fine faces from the face array
    of its normal axis; the slab flattens (order='F') in interface face order."""
    idx = []
    t = 0
    for a in range(grid.ndim):
        if a == iface.axis:
            idx.append(iface.plane)
        else:
            idx.append(slice(iface.lo[t], iface.hi[t]))
            t += 1
    return tuple(idx)
