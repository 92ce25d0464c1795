"""Coarse mortar spaces on the interface skeleton.

Mortar functions are stored in the fine-face trace basis of each interface
(one value per fine face), which makes the duality pairing with normal fluxes
an exact dot product and lets basis vectors built from different sources
(polynomials, restrictions of earlier interface solutions, raw fine traces)
compose freely.  Per interface the basis is orthonormalized under the
area-weighted trace inner product; polynomials come first and are protected,
a dependent enrichment vector is dropped.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import MortarFlowError
from .grid import CoarsePartition, interface_face_slab, interface_trace_coordinates

DROP_TOL = 1.0e-10

RECIPES = ("ms", "p0", "p1", "p0+ms", "p1+ms", "fine")


def recipe_parts(recipe: str) -> tuple[int, bool, bool]:
    """(polynomial order or -1, include multiscale vector, full fine traces)."""
    if recipe not in RECIPES:
        raise ValueError(f"unknown mortar recipe {recipe!r}, expected one of {RECIPES}")
    if recipe == "fine":
        return -1, False, True
    order = -1
    if recipe.startswith("p0"):
        order = 0
    elif recipe.startswith("p1"):
        order = 1
    return order, recipe.endswith("ms"), False


@dataclass(frozen=True)
class MortarSpace:
    """Per-interface orthonormal basis vectors over fine-face trace slots."""

    partition: CoarsePartition
    bases: tuple[np.ndarray, ...]            # per interface, (n_faces, nb)
    kinds: tuple[tuple[str, ...], ...]       # per interface, basis origin labels
    raw_multiscale: tuple[np.ndarray | None, ...] = field(repr=False, default=None)
    generation: int = 0

    @property
    def n_interfaces(self) -> int:
        return len(self.bases)

    @property
    def counts(self) -> np.ndarray:
        return np.array([b.shape[1] for b in self.bases], dtype=np.int64)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)])

    @property
    def dim(self) -> int:
        return int(self.counts.sum())

    def dofs_of(self, interface: int) -> np.ndarray:
        off = self.offsets
        return np.arange(off[interface], off[interface + 1])

    def dof_kinds(self) -> list[str]:
        out = []
        for kinds in self.kinds:
            out.extend(kinds)
        return out


@dataclass(frozen=True)
class MortarSolution:
    """Interface unknowns: one coefficient per mortar basis function, plus the
    evaluated fine-face trace per interface (the cache later steps restrict)."""

    space: MortarSpace
    coefficients: np.ndarray
    traces: tuple[np.ndarray, ...]

    @classmethod
    def from_coefficients(cls, space: MortarSpace, coeffs: np.ndarray) -> "MortarSolution":
        off = space.offsets
        traces = tuple(
            space.bases[i] @ coeffs[off[i] : off[i + 1]] for i in range(space.n_interfaces)
        )
        return cls(space, np.asarray(coeffs, dtype=float), traces)


def build_polynomial_basis(partition: CoarsePartition, interface: int, order: int) -> np.ndarray:
    """Raw polynomial trace vectors on one interface, evaluated at the
    fine-face centroids: order 0 -> {1}; order 1 adds the centered linear
    coordinate per transverse direction."""
    if order not in (0, 1):
        raise ValueError(f"polynomial mortar order must be 0 or 1, got {order}")
    iface = partition.interfaces[interface]
    m = iface.n_faces
    cols = [np.ones(m)]
    if order == 1:
        xi = interface_trace_coordinates(partition, interface)
        if xi.ndim == 1:
            cols.append(xi - 0.5)
        else:
            cols.append(xi[:, 0] - 0.5)
            cols.append(xi[:, 1] - 0.5)
    return np.column_stack(cols)


def build_multiscale_basis(partition: CoarsePartition, interface: int, previous_trace) -> np.ndarray:
    """The enrichment vector: the previous interface solution's fine-face
    trace restricted to this interface, verbatim."""
    iface = partition.interfaces[interface]
    if previous_trace is None:
        raise MortarFlowError(
            f"interface {interface}: no previous trace; run the fine initialization first"
        )
    v = np.asarray(previous_trace, dtype=float)
    if v.shape != (iface.n_faces,):
        raise MortarFlowError(
            f"interface {interface}: trace has {v.shape} values, expected ({iface.n_faces},)"
        )
    return v.copy()


def orthonormalize_columns(raw: np.ndarray, weights: np.ndarray, n_protected: int,
                           drop_tol: float = DROP_TOL):
    """Weighted modified Gram-Schmidt with a re-orthogonalization pass.

    Returns (Q, kept column indices).  The first ``n_protected`` columns are
    dropped only if numerically zero; later columns are dropped when their
    residual falls below ``drop_tol`` times their original norm.
    """
    w = np.asarray(weights, dtype=float)
    cols = []
    kept = []
    for j in range(raw.shape[1]):
        v = raw[:, j].astype(float).copy()
        norm0 = np.sqrt(np.sum(w * v * v))
        if norm0 == 0.0:
            continue
        for _ in range(2):
            for u in cols:
                v -= np.sum(w * u * v) * u
        norm1 = np.sqrt(np.sum(w * v * v))
        tol = 1e-14 if j < n_protected else drop_tol
        if norm1 < tol * norm0:
            continue
        cols.append(v / norm1)
        kept.append(j)
    if not cols:
        return np.zeros((raw.shape[0], 0)), []
    return np.column_stack(cols), kept


def build_space(
    partition: CoarsePartition,
    recipe: str,
    previous_traces=None,
    drop_tol: float = DROP_TOL,
    generation: int = 0,
) -> MortarSpace:
    """Assemble and orthonormalize the mortar space for every interface.

    ``previous_traces`` (one vector per interface) supplies the enrichment
    vectors for the ``*ms`` recipes: the fine-solve trace at initialization,
    the previous step's interface solution afterwards.
    """
    order, with_ms, fine = recipe_parts(recipe)
    grid = partition.grid
    bases = []
    kinds = []
    raw_ms = []
    for iface in partition.interfaces:
        w = np.full(iface.n_faces, grid.face_area(iface.axis))
        if fine:
            q = np.eye(iface.n_faces) / np.sqrt(w)[:, None]
            bases.append(q)
            kinds.append(("fine",) * iface.n_faces)
            raw_ms.append(None)
            continue
        raw_cols = []
        raw_kinds = []
        n_protected = 0
        if order >= 0:
            poly = build_polynomial_basis(partition, iface.index, order)
            n_protected = poly.shape[1]
            raw_cols.append(poly)
            raw_kinds.extend(["p0"] + ["p1"] * (poly.shape[1] - 1))
        ms_vec = None
        if with_ms:
            trace = None if previous_traces is None else previous_traces[iface.index]
            ms_vec = build_multiscale_basis(partition, iface.index, trace)
            raw_cols.append(ms_vec[:, None])
            raw_kinds.append("ms")
        raw = np.hstack(raw_cols)
        q, kept = orthonormalize_columns(raw, w, n_protected, drop_tol)
        bases.append(q)
        kinds.append(tuple(raw_kinds[k] for k in kept))
        raw_ms.append(ms_vec)
    return MortarSpace(
        partition=partition,
        bases=tuple(bases),
        kinds=tuple(kinds),
        raw_multiscale=tuple(raw_ms),
        generation=generation,
    )


def initialize_from_fine(fine_flow, partition: CoarsePartition) -> list[np.ndarray]:
    """Fine-face pressure-trace values on each coarse interface, extracted from
    a fine-scale hybridized solve (its face multipliers are pressure traces)."""
    if fine_flow.face_traces is None:
        raise MortarFlowError("flow solution carries no face traces; use the fine solver")
    out = []
    for iface in partition.interfaces:
        slab = interface_face_slab(partition.grid, iface)
        vals = fine_flow.face_traces[iface.axis][slab]
        out.append(np.asarray(vals).ravel(order="F").copy())
    return out


def scatter_traces(partition: CoarsePartition, traces) -> list[np.ndarray]:
    """Spread per-interface trace vectors into full per-axis face arrays
    (non-skeleton faces stay zero)."""
    grid = partition.grid
    out = grid.zeros_faces()
    for iface in partition.interfaces:
        slab = interface_face_slab(grid, iface)
        out[iface.axis][slab] = traces[iface.index].reshape(iface.shape, order="F")
    return out
