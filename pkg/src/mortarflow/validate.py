"""Fast built-in invariant checks on small instances (the `validate` command)."""

import numpy as np

from .diagnostics import boundary_flux_error, cell_balance_error, weak_continuity_error
from .grid import build_coarse_partition, build_grid
from .local_solver import assemble_blocks
from .media import FluidModel, synth_media
from .mortar import build_space, initialize_from_fine
from .pressure import (
    assemble_interface_system,
    fine_solve,
    recover_solution,
    solve_interface,
)
from .transport import advance, make_wells, watercut


def _check(name: str, ok: bool, detail: str, verbose: bool) -> bool:
    if verbose:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok


def run_validation(verbose: bool = True) -> bool:
    ok = True
    rng = np.random.default_rng(7)

    grid = build_grid((16, 16))
    part = build_coarse_partition(grid, 4)
    covered = sum(i.n_faces for i in part.interfaces)
    expected = 3 * 16 * 2  # 3 skeleton planes of 16 faces, both axes
    ok &= _check("partition skeleton coverage", covered == expected,
                 f"{covered} skeleton faces, expected {expected}", verbose)

    media = synth_media("lognormal", (16, 16), seed=3, sigma=1.5)
    fluid = FluidModel()
    wells = make_wells("type1", grid, 1.0)
    q = wells.source_array(grid)
    mob = fluid.total_mobility(np.zeros(grid.dims))

    ref = fine_solve(grid, media, mob, q)
    bal = cell_balance_error(ref, grid, q)
    ok &= _check("fine solve conservation", bal < 1e-10, f"max defect {bal:.2e}", verbose)
    bnd = boundary_flux_error(ref, grid)
    ok &= _check("fine solve no-flow boundary", bnd == 0.0, f"max boundary flux {bnd:.2e}", verbose)

    blocks = assemble_blocks(part, media, mob)
    traces = initialize_from_fine(ref, part)
    space = build_space(part, "p0+ms", traces)
    system = assemble_interface_system(space, part, blocks, q)
    A = system.matrix
    asym = np.abs(A - A.T).max() / max(np.abs(A).max(), 1e-300)
    ok &= _check("interface operator symmetry", asym < 1e-10, f"relative asymmetry {asym:.2e}", verbose)
    eigs = np.linalg.eigvalsh(A)
    ok &= _check("interface operator semidefiniteness",
                 eigs.min() >= -1e-8 * np.abs(eigs).max(),
                 f"min eigenvalue {eigs.min():.2e}", verbose)

    lam = solve_interface(system)
    flow = recover_solution(lam, part, blocks, q, system=system)
    bal = cell_balance_error(flow, grid, q, part)
    ok &= _check("coarse solve conservation", bal < 1e-10, f"max defect {bal:.2e}", verbose)
    cont = weak_continuity_error(flow, part)
    ok &= _check("weak flux continuity", cont < 1e-8, f"max residual {cont:.2e}", verbose)

    fine_space = build_space(part, "fine")
    sys_f = assemble_interface_system(fine_space, part, blocks, q)
    lam_f = solve_interface(sys_f)
    flow_f = recover_solution(lam_f, part, blocks, q, system=sys_f)
    scale = max(np.abs(f).max() for f in ref.flux)
    diff = max(np.abs(a - b).max() for a, b in zip(flow_f.flux, ref.flux)) / scale
    ok &= _check("full-trace space reproduces the fine solve", diff < 1e-8,
                 f"relative flux difference {diff:.2e}", verbose)

    sat = np.zeros(grid.dims)
    sat2 = advance(sat, grid, media, fluid, ref.flux, wells, 5.0)
    mass = (media.porosity * grid.cell_volume * (sat2 - sat)).sum()
    ok &= _check("transport mass accounting", 0 < mass <= 5.0 * 1.0 + 1e-9,
                 f"injected water volume {mass:.3f}", verbose)
    ok &= _check("saturation bounds", sat2.min() >= 0 and sat2.max() <= 1,
                 f"range [{sat2.min():.3f}, {sat2.max():.3f}]", verbose)
    wc = watercut(sat2, fluid, wells)
    ok &= _check("watercut range", 0.0 <= wc <= 1.0, f"wc={wc:.3f}", verbose)
    return bool(ok)
