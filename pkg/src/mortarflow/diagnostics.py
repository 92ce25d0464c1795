"""Conservation and flux-continuity checks used by tests and `validate`."""

import numpy as np

from .grid import StructuredGrid, CoarsePartition, interface_face_slab
from .pressure import FlowSolution


def divergence(grid: StructuredGrid, flux) -> np.ndarray:
    """Net outflow per cell from per-axis face arrays."""
    div = np.zeros(grid.dims)
    nd = grid.ndim
    for a in range(nd):
        n_a = grid.dims[a]
        lo = [slice(None)] * nd
        hi = [slice(None)] * nd
        lo[a] = slice(0, n_a)
        hi[a] = slice(1, n_a + 1)
        div += flux[a][tuple(hi)] - flux[a][tuple(lo)]
    return div


def cell_balance_error(flow: FlowSolution, grid: StructuredGrid, source,
                       partition: CoarsePartition | None = None) -> float:
    """Max relative per-cell flux-balance defect |div u - q| / flux scale.

    For a coarse solution the interface fluxes are stored as two-side
    averages; the one-sided values each block actually produced are
    reconstructed from the stored jumps before taking the divergence.
    """
    div = divergence(grid, flux=flow.flux)
    if flow.interface_jumps is not None and partition is not None:
        nd = grid.ndim
        for iface, jump in zip(partition.interfaces, flow.interface_jumps):
            slab = interface_face_slab(grid, iface)
            half = 0.5 * jump.reshape(iface.shape, order="F")
            # minus-side cells see U_avg + jump/2 on their high face,
            # plus-side cells see U_avg - jump/2 on their low face
            minus_cell = list(slab)
            minus_cell[iface.axis] = iface.plane - 1
            plus_cell = list(slab)
            plus_cell[iface.axis] = iface.plane
            div[tuple(minus_cell)] += half
            div[tuple(plus_cell)] += half
    q = np.asarray(source, dtype=float)
    err = np.abs(div - q).max()
    scale = max(max(np.abs(f).max() for f in flow.flux), np.abs(q).max(), 1e-300)
    return float(err / scale)


def weak_continuity_error(flow: FlowSolution, partition: CoarsePartition) -> float:
    """Max over mortar bases of the basis-weighted interface flux jump,
    normalized by the interface size times the global flux scale."""
    if flow.mortar is None or flow.interface_jumps is None:
        return 0.0
    space = flow.mortar.space
    scale = max(max(np.abs(f).max() for f in flow.flux), 1e-300)
    worst = 0.0
    for i, jump in enumerate(flow.interface_jumps):
        basis = space.bases[i]
        if basis.size == 0:
            continue
        vals = np.abs(basis.T @ jump) / (jump.size * scale)
        worst = max(worst, float(vals.max()))
    return worst


def boundary_flux_error(flow: FlowSolution, grid: StructuredGrid) -> float:
    """Largest |flux| on the outer boundary (no-flow contract)."""
    worst = 0.0
    nd = grid.ndim
    for a in range(nd):
        lo = [slice(None)] * nd
        hi = [slice(None)] * nd
        lo[a] = 0
        hi[a] = grid.dims[a]
        worst = max(worst, float(np.abs(flow.flux[a][tuple(lo)]).max()))
        worst = max(worst, float(np.abs(flow.flux[a][tuple(hi)]).max()))
    return worst
