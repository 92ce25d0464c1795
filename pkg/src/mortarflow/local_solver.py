"""Lowest-order mixed finite element systems on single coarse blocks.

The velocity mass matrix uses the lumped (trapezoidal) quadrature, so each
flux unknown decouples: an interior fine face between cells L and R along
axis a carries the two-point relation

    U_f = T_f (p_L - p_R),   1/T_f = dx_L/(2 lam_L k_aL A_f) + dx_R/(2 lam_R k_aR A_f)

with U_f the area-integrated normal flux (volumetric rate, oriented along the
positive axis) and T_f the harmonic series of the two half-cell
transmissibilities t = 2 lam k A / dx.  A block-boundary face on the coarse
skeleton keeps only its interior half-cell t, with the mortar trace as
Dirichlet datum; outer-boundary faces are pinned to zero flux.  Eliminating
the fluxes leaves a small symmetric positive definite cell-pressure system
per block, factorized once per mobility update and reused for every
right-hand side.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import AssemblyError, SolverError
from .grid import CoarsePartition
from .media import MediaField

# (axis, high) side keys in canonical order
def side_keys(ndim: int):
    return [(a, hi) for a in range(ndim) for hi in (False, True)]


class BlockTemplate:
    """Index structures shared by every block of a uniform partition.

    All blocks are congruent boxes, so the local Fortran-flat cell indices of
    interior-face pairs and of boundary-adjacent cells are computed once.
    """

    def __init__(self, partition: CoarsePartition):
        nd = partition.ndim
        n = partition.ratio
        self.local_dims = (n,) * nd
        self.n_cells = n**nd
        flat = np.arange(self.n_cells).reshape(self.local_dims, order="F")

        # interior faces along each axis: (low cell, high cell), slab order='F'
        self.face_lo: list[np.ndarray] = []
        self.face_hi: list[np.ndarray] = []
        for a in range(nd):
            sl_lo = [slice(None)] * nd
            sl_hi = [slice(None)] * nd
            sl_lo[a] = slice(0, n - 1)
            sl_hi[a] = slice(1, n)
            self.face_lo.append(flat[tuple(sl_lo)].ravel(order="F").copy())
            self.face_hi.append(flat[tuple(sl_hi)].ravel(order="F").copy())

        # cells adjacent to each side, in the side slab's order='F'
        self.side_cells: dict[tuple[int, bool], np.ndarray] = {}
        for a, hi in side_keys(nd):
            sl = [slice(None)] * nd
            sl[a] = n - 1 if hi else 0
            self.side_cells[(a, hi)] = flat[tuple(sl)].ravel(order="F").copy()


@dataclass
class LocalBlockSystem:
    """Factorized cell-pressure system of one block at a fixed mobility."""

    block: int
    partition: CoarsePartition
    template: BlockTemplate
    trans_interior: list[np.ndarray]          # per axis, block-interior faces
    half_trans: list[np.ndarray]              # per axis, per-cell half transmissibility t
    side_kind: dict[tuple[int, bool], int]    # interface index, or -1 for the outer boundary
    mobility_version: int = 0
    _chol: tuple = field(default=None, repr=False)
    _pinned: bool = field(default=False, repr=False)

    @property
    def n_cells(self) -> int:
        return self.template.n_cells

    def skeleton_sides(self):
        return [(a, hi) for (a, hi), idx in self.side_kind.items() if idx >= 0]

    def side_trans(self, axis: int, high: bool) -> np.ndarray:
        """Half transmissibility of the cells adjacent to one side."""
        cells = self.template.side_cells[(axis, high)]
        return self.half_trans[axis][cells]

    # -- solves ------------------------------------------------------------

    def _solve_cells(self, rhs: np.ndarray) -> np.ndarray:
        if not self._pinned:
            return cho_solve(self._chol, rhs)
        # free-floating block (no Dirichlet side): pin the first cell
        squeeze = rhs.ndim == 1
        r = rhs.reshape(self.n_cells, -1)
        scale = np.abs(r).sum()
        imbalance = np.abs(r.sum(axis=0)).max()
        if scale > 0 and imbalance > 1e-8 * scale:
            raise SolverError(
                f"block {self.block} has no Dirichlet data and an incompatible source"
            )
        sol = np.zeros_like(r)
        sol[1:] = cho_solve(self._chol, r[1:])
        return sol[:, 0] if squeeze else sol

    def solve_dirichlet(self, traces: dict) -> "LocalSolution":
        """Solve with mortar trace data on skeleton sides and zero source.

        ``traces`` maps (axis, high) -> values on that side's fine faces
        (slab order); sides on the outer boundary carry no data.
        """
        rhs = self._trace_rhs(traces)
        p = self._solve_cells(rhs)
        return LocalSolution(self.block, p, self._fluxes(p, traces))

    def solve_source(self, q_local: np.ndarray) -> "LocalSolution":
        """Solve with zero trace data and the given per-cell integrated source."""
        q = np.asarray(q_local, dtype=float).ravel(order="F")
        if q.size != self.n_cells:
            raise ValueError("source size does not match the block")
        p = self._solve_cells(q)
        return LocalSolution(self.block, p, self._fluxes(p, {}))

    def solve_combined(self, traces: dict, q_local: np.ndarray) -> "LocalSolution":
        q = np.asarray(q_local, dtype=float).ravel(order="F")
        rhs = self._trace_rhs(traces) + q
        p = self._solve_cells(rhs)
        return LocalSolution(self.block, p, self._fluxes(p, traces))

    def solve_many(self, trace_matrix: np.ndarray, sides) -> np.ndarray:
        """Cell pressures for a batch of trace vectors stacked column-wise.

        ``sides`` lists (axis, high, offset, count): the rows of
        ``trace_matrix`` belonging to each skeleton side.
        """
        rhs = np.zeros((self.n_cells, trace_matrix.shape[1]))
        for axis, high, off, cnt in sides:
            cells = self.template.side_cells[(axis, high)]
            t = self.side_trans(axis, high)
            rhs[cells] += t[:, None] * trace_matrix[off : off + cnt]
        return self._solve_cells(rhs)

    def _trace_rhs(self, traces: dict) -> np.ndarray:
        rhs = np.zeros(self.n_cells)
        for (axis, high), vals in traces.items():
            if self.side_kind[(axis, high)] < 0:
                raise ValueError(f"side {(axis, high)} of block {self.block} is on the outer boundary")
            cells = self.template.side_cells[(axis, high)]
            v = np.asarray(vals, dtype=float).ravel(order="F")
            rhs[cells] += self.side_trans(axis, high) * v
        return rhs

    def _fluxes(self, p, traces: dict):
        """Per-axis local flux arrays (block-local planes 0..n); skeleton planes
        hold this block's one-sided values, outer-boundary planes stay zero."""
        if p.ndim != 1:
            raise ValueError("single solution vector expected")
        nd = self.partition.ndim
        n = self.partition.ratio
        shape = self.template.local_dims
        out = []
        for a in range(nd):
            fshape = tuple(n + 1 if b == a else n for b in range(nd))
            U = np.zeros(fshape)
            dp = p[self.template.face_lo[a]] - p[self.template.face_hi[a]]
            inner = [slice(None)] * nd
            inner[a] = slice(1, n)
            U[tuple(inner)] = (self.trans_interior[a] * dp).reshape(
                tuple(n - 1 if b == a else n for b in range(nd)), order="F"
            )
            out.append(U)
        for axis, high in self.skeleton_sides():
            cells = self.template.side_cells[(axis, high)]
            t = self.side_trans(axis, high)
            vals = traces.get((axis, high))
            v = np.zeros(cells.size) if vals is None else np.asarray(vals, float).ravel(order="F")
            one_sided = t * (p[cells] - v)          # outward through that side
            sl = [slice(None)] * nd
            sl[axis] = n if high else 0
            tshape = tuple(n for b in range(nd) if b != axis)
            signed = one_sided if high else -one_sided   # orient along +axis
            out[axis][tuple(sl)] = signed.reshape(tshape, order="F")
        return out

    def boundary_out_flux(self, p: np.ndarray, traces: dict) -> dict:
        """Block-outward flux t*(p_adj - trace) on each skeleton side."""
        out = {}
        for axis, high in self.skeleton_sides():
            cells = self.template.side_cells[(axis, high)]
            t = self.side_trans(axis, high)
            v = traces.get((axis, high))
            v = np.zeros(cells.size) if v is None else np.asarray(v, float).ravel(order="F")
            out[(axis, high)] = t * (p[cells] - v)
        return out


@dataclass
class LocalSolution:
    """Cell pressures and face fluxes of one block solve."""

    block: int
    pressure: np.ndarray                 # flat, order='F' over the block box
    fluxes: list[np.ndarray]             # per axis, local face arrays

    def pressure_box(self, partition: CoarsePartition) -> np.ndarray:
        n = partition.ratio
        return self.pressure.reshape((n,) * partition.ndim, order="F")


def half_transmissibilities(grid, media: MediaField, cell_mobility) -> list[np.ndarray]:
    """Per-cell directional half transmissibility t_a = 2 lam k_a A_a / dx_a."""
    lam = np.asarray(cell_mobility, dtype=float)
    if lam.shape != grid.dims:
        lam = np.broadcast_to(lam, grid.dims)
    if np.any(lam <= 0):
        raise AssemblyError("total mobility must be positive")
    out = []
    for a in range(grid.ndim):
        out.append(2.0 * lam * media.perm[a] * grid.face_area(a) / grid.spacing[a])
    return out


def assemble_block(
    partition: CoarsePartition,
    block: int,
    media: MediaField,
    cell_mobility,
    template: BlockTemplate | None = None,
    half_trans: list[np.ndarray] | None = None,
    mobility_version: int = 0,
) -> LocalBlockSystem:
    """Assemble and factorize one block's condensed pressure system."""
    grid = partition.grid
    if media.dims != grid.dims:
        raise AssemblyError(f"media dims {media.dims} do not match grid {grid.dims}")
    if template is None:
        template = BlockTemplate(partition)
    if half_trans is None:
        half_trans = half_transmissibilities(grid, media, cell_mobility)

    box = partition.cell_slices(block)
    t_local = [half_trans[a][box].ravel(order="F") for a in range(grid.ndim)]

    mc = template.n_cells
    A = np.zeros((mc, mc))
    diag = np.zeros(mc)
    trans_int = []
    for a in range(grid.ndim):
        lo, hi = template.face_lo[a], template.face_hi[a]
        t_lo, t_hi = t_local[a][lo], t_local[a][hi]
        T = t_lo * t_hi / (t_lo + t_hi)
        trans_int.append(T)
        A[lo, hi] = -T
        A[hi, lo] = -T
        np.add.at(diag, lo, T)
        np.add.at(diag, hi, T)

    side_kind = {}
    for axis, high, iface in partition.block_sides(block):
        if iface is None:
            side_kind[(axis, high)] = -1
            continue
        side_kind[(axis, high)] = iface.index
        cells = template.side_cells[(axis, high)]
        diag[cells] += t_local[axis][cells]

    A[np.arange(mc), np.arange(mc)] = diag
    sys = LocalBlockSystem(
        block=block,
        partition=partition,
        template=template,
        trans_interior=trans_int,
        half_trans=t_local,
        side_kind=side_kind,
        mobility_version=mobility_version,
    )
    pinned = all(idx < 0 for idx in side_kind.values())
    try:
        if pinned:
            sys._chol = cho_factor(A[1:, 1:])
            sys._pinned = True
        else:
            sys._chol = cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(f"block {block}: singular local system") from exc
    return sys


def assemble_blocks(
    partition: CoarsePartition,
    media: MediaField,
    cell_mobility,
    mobility_version: int = 0,
    threads: int = 1,
) -> list[LocalBlockSystem]:
    """Assemble every block; block systems are independent, so this maps in
    parallel when ``threads`` > 1 (results come back in block order)."""
    template = BlockTemplate(partition)
    half_trans = half_transmissibilities(partition.grid, media, cell_mobility)

    def make(b):
        return assemble_block(
            partition, b, media, cell_mobility,
            template=template, half_trans=half_trans,
            mobility_version=mobility_version,
        )

    blocks = range(partition.n_blocks)
    if threads <= 1:
        return [make(b) for b in blocks]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(make, blocks))


def block_boundary_flux(solution: LocalSolution, system: LocalBlockSystem) -> dict:
    """Block-outward fluxes on the skeleton sides of a solved block.

    Flips the global positive-axis orientation to the block-outward normal:
    outward = +U on a high side, -U on a low side.
    """
    nd = system.partition.ndim
    n = system.partition.ratio
    out = {}
    for axis, high in system.skeleton_sides():
        sl = [slice(None)] * nd
        sl[axis] = n if high else 0
        vals = solution.fluxes[axis][tuple(sl)].ravel(order="F")
        out[(axis, high)] = vals if high else -vals
    return out
