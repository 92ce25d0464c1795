"""Explicit upwind finite-volume transport of the water saturation.

Face fluxes are the area-integrated rates of the pressure stage, frozen over
one outer interval; the water flux through a face is the total flux times the
fractional flow of the upstream cell.  Wells are plain cell sources: an
injector adds pure water, a producer removes total fluid at the cell's
fractional flow.  Substeps are CFL-limited forward Euler.
"""

from dataclasses import dataclass

import numpy as np

from .errors import StabilityError
from .grid import StructuredGrid
from .media import FluidModel, MediaField

BOUND_SLACK = 1.0e-12


@dataclass(frozen=True)
class Well:
    cell: tuple[int, ...]
    rate: float
    kind: str  # "inject" | "produce"


@dataclass(frozen=True)
class WellConfig:
    wells: tuple[Well, ...]

    def __post_init__(self):
        rates = np.array([w.rate for w in self.wells])
        if rates.size:
            if abs(rates.sum()) > 1e-10 * np.abs(rates).sum():
                raise ValueError(f"well rates must balance, net {rates.sum():.3e}")
            for w in self.wells:
                if w.kind == "inject" and w.rate <= 0:
                    raise ValueError("injector rates must be positive")
                if w.kind == "produce" and w.rate >= 0:
                    raise ValueError("producer rates must be negative")
                if w.kind not in ("inject", "produce"):
                    raise ValueError(f"unknown well kind {w.kind!r}")

    @property
    def injectors(self):
        return [w for w in self.wells if w.kind == "inject"]

    @property
    def producers(self):
        return [w for w in self.wells if w.kind == "produce"]

    def source_array(self, grid: StructuredGrid) -> np.ndarray:
        q = grid.zeros_cells()
        for w in self.wells:
            q[w.cell] += w.rate
        return q


def _center_index(n: int) -> int:
    return (n - 1) // 2


def make_wells(layout: str, grid: StructuredGrid, total_rate: float,
               completion: str = "mid") -> WellConfig:
    """Five-spot style layouts: type1 injects ``total_rate`` split over the four
    corner cells with one center producer; type2 swaps the roles.

    In 3D the wells sit in the middle layer of each corner column by default;
    ``completion='column'`` spreads each well over its full vertical column.
    """
    if layout not in ("type1", "type2"):
        raise ValueError(f"unknown well layout {layout!r}")
    if total_rate <= 0:
        raise ValueError("total rate must be positive")
    nd = grid.ndim
    nx, ny = grid.dims[0], grid.dims[1]
    corners2d = [(0, 0), (nx - 1, 0), (0, ny - 1), (nx - 1, ny - 1)]
    center2d = (_center_index(nx), _center_index(ny))

    def cells_at(xy):
        if nd == 2:
            return [xy]
        nz = grid.dims[2]
        if completion == "mid":
            return [(*xy, _center_index(nz))]
        if completion == "column":
            return [(*xy, k) for k in range(nz)]
        raise ValueError(f"unknown completion {completion!r}")

    corner_cells = [cells_at(c) for c in corners2d]
    center_cells = cells_at(center2d)

    wells = []
    corner_sign = +1.0 if layout == "type1" else -1.0
    corner_kind = "inject" if layout == "type1" else "produce"
    center_kind = "produce" if layout == "type1" else "inject"
    for group in corner_cells:
        per_cell = corner_sign * total_rate / 4.0 / len(group)
        for c in group:
            wells.append(Well(cell=c, rate=per_cell, kind=corner_kind))
    per_cell = -corner_sign * total_rate / len(center_cells)
    for c in center_cells:
        wells.append(Well(cell=c, rate=per_cell, kind=center_kind))
    return WellConfig(tuple(wells))


def pore_volume(grid: StructuredGrid, media: MediaField) -> float:
    return float(media.porosity.sum() * grid.cell_volume)


def default_total_rate(grid: StructuredGrid, media: MediaField, total_time: float) -> float:
    """Rate injecting exactly one pore volume over the simulated horizon."""
    return pore_volume(grid, media) / total_time


def _cell_abs_flux(grid: StructuredGrid, flux) -> np.ndarray:
    tot = grid.zeros_cells()
    nd = grid.ndim
    for a in range(nd):
        n_a = grid.dims[a]
        lo = [slice(None)] * nd
        hi = [slice(None)] * nd
        lo[a] = slice(0, n_a)
        hi[a] = slice(1, n_a + 1)
        tot += np.abs(flux[a][tuple(lo)]) + np.abs(flux[a][tuple(hi)])
    return tot


def cfl_dt(grid: StructuredGrid, media: MediaField, fluid: FluidModel, flux,
           wells: WellConfig, interval: float, cfl: float = 0.5) -> float:
    """Largest stable substep: cfl * min_c of phi V / (total |flux| * max|f'|).

    The per-cell flux total includes the well rate; with nothing moving the
    whole interval is returned in one step.
    """
    tot = _cell_abs_flux(grid, flux)
    for w in wells.wells:
        tot[w.cell] += abs(w.rate)
    slope = fluid.max_fractional_flow_slope()
    pv = media.porosity * grid.cell_volume
    active = tot > 0
    if not np.any(active):
        return interval
    dt = cfl * float(np.min(pv[active] / (tot[active] * slope)))
    return min(dt, interval)


def advance(sat, grid: StructuredGrid, media: MediaField, fluid: FluidModel, flux,
            wells: WellConfig, interval: float, cfl: float = 0.5,
            bound_slack: float = BOUND_SLACK) -> np.ndarray:
    """March the saturation over ``interval`` with CFL-limited Euler substeps.

    ``bound_slack`` is the admissible overshoot of [0, 1] before the step is
    declared unstable: the default suits exactly conservative flux fields; a
    coarse solve with averaged interface fluxes violates per-cell conservation
    by half its flux jump, which relaxes the maximum principle by
    interval * defect / pore volume (the caller knows the defect).
    """
    if interval <= 0:
        raise ValueError("interval must be positive")
    S = np.array(sat, dtype=float, copy=True)
    if S.shape != grid.dims:
        raise ValueError("saturation must be shaped like the grid cells")

    dt_max = cfl_dt(grid, media, fluid, flux, wells, interval, cfl)
    n_sub = max(1, int(np.ceil(interval / dt_max - 1e-12)))
    dt = interval / n_sub

    nd = grid.ndim
    pv = media.porosity * grid.cell_volume
    # upwind side per face is fixed for the whole interval (flux is frozen)
    up_is_low = [flux[a] >= 0.0 for a in range(nd)]
    inj_cells = [w.cell for w in wells.injectors]
    inj_rates = [w.rate for w in wells.injectors]
    prod_cells = [w.cell for w in wells.producers]
    prod_rates = [w.rate for w in wells.producers]

    lo_view = []
    hi_view = []
    int_view = []
    for a in range(nd):
        n_a = grid.dims[a]
        lo = [slice(None)] * nd
        hi = [slice(None)] * nd
        it = [slice(None)] * nd
        lo[a] = slice(0, n_a - 1)
        hi[a] = slice(1, n_a)
        it[a] = slice(1, n_a)
        lo_view.append(tuple(lo))
        hi_view.append(tuple(hi))
        int_view.append(tuple(it))

    for _ in range(n_sub):
        fw = fluid.fractional_flow(S)
        div = np.zeros(grid.dims)
        for a in range(nd):
            fw_up = np.where(up_is_low[a][int_view[a]], fw[lo_view[a]], fw[hi_view[a]])
            water = flux[a][int_view[a]] * fw_up
            div[lo_view[a]] += water
            div[hi_view[a]] -= water
        S -= dt * div / pv
        for c, r in zip(inj_cells, inj_rates):
            S[c] += dt * r / pv[c]
        for c, r in zip(prod_cells, prod_rates):
            S[c] += dt * r * fw[c] / pv[c]
        smin, smax = S.min(), S.max()
        if smin < -bound_slack or smax > 1.0 + bound_slack:
            raise StabilityError(
                f"saturation left [0,1] beyond slack {bound_slack:.3e}: "
                f"range [{smin:.6g}, {smax:.6g}]; reduce the CFL number"
            )
        np.clip(S, 0.0, 1.0, out=S)
    return S


def watercut(sat, fluid: FluidModel, wells: WellConfig) -> float:
    """Rate-weighted water fraction of the produced fluid."""
    producers = wells.producers
    if not producers:
        raise ValueError("no producer well configured")
    rates = np.array([abs(w.rate) for w in producers])
    fw = np.array([float(fluid.fractional_flow(sat[w.cell])) for w in producers])
    return float(np.sum(rates * fw) / rates.sum())
