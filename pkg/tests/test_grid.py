import numpy as np
import pytest

from mortarflow import (
    build_coarse_partition,
    build_grid,
    interface_trace_coordinates,
)
from mortarflow.grid import interface_face_slab


class TestStructuredGrid:
    def test_face_counts_3d_benchmark_dims(self):
        # 61*220*30 + 60*221*30 + 60*220*31
        grid = build_grid((60, 220, 30))
        assert grid.total_faces == 61 * 220 * 30 + 60 * 221 * 30 + 60 * 220 * 31
        assert grid.total_faces == 1_209_600

        grid = build_grid((60, 220, 50))
        assert grid.total_faces == 61 * 220 * 50 + 60 * 221 * 50 + 60 * 220 * 51
        assert grid.total_faces == 2_007_200

    def test_single_cell(self):
        grid = build_grid((1, 1))
        assert grid.n_cells == 1
        assert grid.total_faces == 4

    def test_face_dims_and_areas(self):
        grid = build_grid((4, 6, 5), (0.5, 2.0, 1.5))
        assert grid.face_dims(0) == (5, 6, 5)
        assert grid.face_dims(1) == (4, 7, 5)
        assert grid.face_dims(2) == (4, 6, 6)
        assert grid.cell_volume == pytest.approx(1.5)
        assert grid.face_area(0) == pytest.approx(2.0 * 1.5)
        assert grid.face_area(2) == pytest.approx(0.5 * 2.0)

    @pytest.mark.parametrize("dims", [(0, 4), (4, -1), (3, 2, 0)])
    def test_invalid_dims_rejected(self, dims):
        with pytest.raises(ValueError):
            build_grid(dims)

    def test_invalid_spacing_rejected(self):
        with pytest.raises(ValueError):
            build_grid((4, 4), (1.0, 0.0))


class TestCoarsePartition:
    def test_block_and_interface_counts_2d(self):
        part = build_coarse_partition(build_grid((60, 220)), 10)
        assert part.n_blocks == 6 * 22
        # (6-1)*22 x-normal + 6*(22-1) y-normal
        assert part.n_interfaces == 5 * 22 + 6 * 21
        assert part.n_interfaces == 236

    def test_block_and_interface_counts_3d(self):
        part = build_coarse_partition(build_grid((60, 220, 30)), 10)
        assert part.n_blocks == 6 * 22 * 3
        assert part.n_interfaces == 5 * 22 * 3 + 6 * 21 * 3 + 6 * 22 * 2
        assert part.n_interfaces == 972

    def test_single_block(self):
        part = build_coarse_partition(build_grid((2, 2)), 2)
        assert part.n_blocks == 1
        assert part.n_interfaces == 0

    def test_non_divisible_ratio_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            build_coarse_partition(build_grid((60, 220)), 7)

    def test_block_index_map_partitions_grid(self):
        part = build_coarse_partition(build_grid((12, 8)), 4)
        bmap = part.block_index_map()
        counts = np.bincount(bmap.ravel(), minlength=part.n_blocks)
        assert np.all(counts == 16)
        # blocks are contiguous boxes
        for b in range(part.n_blocks):
            assert np.all(bmap[part.cell_slices(b)] == b)

    def test_interfaces_cover_skeleton_exactly_once(self):
        grid = build_grid((12, 8, 4))
        part = build_coarse_partition(grid, 4)
        seen = [np.zeros(grid.face_dims(a), dtype=int) for a in range(3)]
        for iface in part.interfaces:
            seen[iface.axis][interface_face_slab(grid, iface)] += 1
        for a in range(3):
            assert seen[a].max() <= 1
        total = sum(int(s.sum()) for s in seen)
        # skeleton faces: interior coarse planes times the transverse cell count
        expected = (2 * 8 * 4) + (1 * 12 * 4) + (0 * 12 * 8)
        assert total == expected

    def test_interface_adjacency_consistent(self):
        part = build_coarse_partition(build_grid((12, 8)), 4)
        for iface in part.interfaces:
            pm = part.block_position(iface.block_minus)
            pp = part.block_position(iface.block_plus)
            diff = np.subtract(pp, pm)
            assert diff[iface.axis] == 1
            assert np.all(np.delete(diff, iface.axis) == 0)
            # side lookup is the involution of adjacency
            assert part.side_interface(iface.block_minus, iface.axis, True) is iface
            assert part.side_interface(iface.block_plus, iface.axis, False) is iface

    def test_interface_ordering_deterministic(self):
        part1 = build_coarse_partition(build_grid((12, 8)), 4)
        part2 = build_coarse_partition(build_grid((12, 8)), 4)
        for a, b in zip(part1.interfaces, part2.interfaces):
            assert (a.axis, a.plane, a.lo, a.hi) == (b.axis, b.plane, b.lo, b.hi)
        axes = [i.axis for i in part1.interfaces]
        assert axes == sorted(axes)


class TestTraceCoordinates:
    def test_two_face_edge(self):
        part = build_coarse_partition(build_grid((4, 2)), 2)
        iface = next(i for i in part.interfaces if i.axis == 0)
        xi = interface_trace_coordinates(part, iface.index)
        assert np.allclose(xi, [0.25, 0.75])

    def test_single_face_edge(self):
        part = build_coarse_partition(build_grid((2, 1)), 1)
        iface = part.interfaces[0]
        assert iface.n_faces == 1
        assert np.allclose(interface_trace_coordinates(part, iface.index), [0.5])

    def test_3d_face_grid(self):
        part = build_coarse_partition(build_grid((20, 10, 10)), 10)
        iface = next(i for i in part.interfaces if i.axis == 0)
        xi = interface_trace_coordinates(part, iface.index)
        assert xi.shape == (100, 2)
        assert np.allclose(xi[0], [0.05, 0.05])
        assert np.allclose(xi[1], [0.15, 0.05])  # first transverse axis fastest
        assert np.allclose(xi[-1], [0.95, 0.95])
