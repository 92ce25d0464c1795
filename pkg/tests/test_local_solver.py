import numpy as np
import pytest

from mortarflow import (
    FluidModel,
    assemble_block,
    assemble_blocks,
    block_boundary_flux,
    build_coarse_partition,
    build_grid,
    synth_media,
)
from mortarflow.local_solver import half_transmissibilities


@pytest.fixture
def two_block_setup():
    """4x2 unit grid split into two 2x2 blocks along x."""
    grid = build_grid((4, 2))
    part = build_coarse_partition(grid, 2)
    media = synth_media("uniform", (4, 2))
    return grid, part, media


def test_half_transmissibility_unit_case(two_block_setup):
    grid, part, media = two_block_setup
    t = half_transmissibilities(grid, media, np.ones(grid.dims))
    # unit cells, K=I, lam=1: half weight t = 2 -> boundary mass weight 1/2
    assert np.allclose(t[0], 2.0)
    assert np.allclose(t[1], 2.0)


def test_interior_face_weight_unit_case(two_block_setup):
    grid, part, media = two_block_setup
    sys0 = assemble_block(part, 0, media, np.ones(grid.dims))
    # interior two-point transmissibility 1 -> mass weight 1
    assert np.allclose(sys0.trans_interior[0], 1.0)
    assert np.allclose(sys0.trans_interior[1], 1.0)
    # skeleton side carries the half weight
    assert np.allclose(sys0.side_trans(0, True), 2.0)


def test_doubling_mobility_doubles_transmissibility(two_block_setup):
    grid, part, media = two_block_setup
    s1 = assemble_block(part, 0, media, np.ones(grid.dims))
    s2 = assemble_block(part, 0, media, 2.0 * np.ones(grid.dims))
    for a in range(2):
        assert np.allclose(s2.trans_interior[a], 2.0 * s1.trans_interior[a])


def test_contrast_harmonic_weighting():
    grid = build_grid((2, 2))
    part = build_coarse_partition(grid, 2)
    media = synth_media("uniform", (2, 2))
    k = media.perm[0].copy()
    k[1, :] = 1e-3
    media = type(media)(perm=(k, media.perm[1]), porosity=media.porosity)
    sys0 = assemble_block(part, 0, media, np.ones(grid.dims))
    # face between k=1 and k=1e-3 cells: 1/T = 1/2 + 1/(2e-3)
    expected = 1.0 / (0.5 + 500.0)
    assert sys0.trans_interior[0][0] == pytest.approx(expected)


def test_constant_trace_gives_constant_pressure(two_block_setup):
    grid, part, media = two_block_setup
    sys0 = assemble_block(part, 0, media, np.ones(grid.dims))
    c = 3.7
    sol = sys0.solve_dirichlet({(0, True): np.full(2, c)})
    assert np.allclose(sol.pressure, c)
    for U in sol.fluxes:
        assert np.allclose(U, 0.0)
    out = block_boundary_flux(sol, sys0)
    assert np.allclose(out[(0, True)], 0.0)


def test_linear_trace_gives_uniform_flux():
    # 1D column of cells with traces on both x sides: exact Darcy throughflow
    grid = build_grid((6, 3))
    part = build_coarse_partition(grid, 3)
    media = synth_media("uniform", (6, 3))
    sys1 = assemble_block(part, 1, media, np.ones(grid.dims))  # middle has both sides? 2 blocks only
    # use block 0 with its right side, plus emulate left boundary no-flow:
    # instead pick the interface trace 1 on the right, 0-flux elsewhere
    sol = sys1.solve_dirichlet({(0, False): np.zeros(3)})
    assert np.allclose(sol.pressure, 0.0)

    # two-sided: 3x3 interior block of a 9x3 grid
    grid = build_grid((9, 3))
    part = build_coarse_partition(grid, 3)
    media = synth_media("uniform", (9, 3))
    sysm = assemble_block(part, 1, media, np.ones(grid.dims))
    sol = sysm.solve_dirichlet({(0, False): np.zeros(3), (0, True): np.full(3, -3.0)})
    # unit pressure drop per cell -> flux T*(dp)=1 per face row through the block
    assert np.allclose(sol.fluxes[0], 1.0)
    assert np.allclose(sol.fluxes[1], 0.0)
    out = block_boundary_flux(sol, sysm)
    assert np.allclose(out[(0, False)], -1.0)  # inflow on the left
    assert np.allclose(out[(0, True)], 1.0)    # outflow on the right


def test_antisymmetric_trace_gives_antisymmetric_pressure():
    grid = build_grid((8, 4))
    part = build_coarse_partition(grid, 4)
    media = synth_media("uniform", (8, 4))
    sys0 = assemble_block(part, 0, media, np.ones(grid.dims))
    vals = np.array([2.0, 1.0, -1.0, -2.0])  # odd under the y mirror
    sol = sys0.solve_dirichlet({(0, True): vals})
    p = sol.pressure_box(part)
    # mirror in y maps the trace to its negative; so must the pressure
    assert np.allclose(p, -p[:, ::-1], atol=1e-12)


def test_local_conservation_random_block():
    rng = np.random.default_rng(5)
    grid = build_grid((8, 8))
    part = build_coarse_partition(grid, 4)
    media = synth_media("lognormal", (8, 8), seed=2, sigma=2.0)
    mob = 0.2 + rng.uniform(0, 1, grid.dims)
    sys0 = assemble_block(part, 0, media, mob)
    traces = {(0, True): rng.normal(size=4), (1, True): rng.normal(size=4)}
    q = rng.normal(size=(4, 4))
    sol = sys0.solve_combined(traces, q)
    div = np.zeros((4, 4))
    for a in range(2):
        sl_hi = [slice(None)] * 2
        sl_lo = [slice(None)] * 2
        sl_hi[a] = slice(1, 5)
        sl_lo[a] = slice(0, 4)
        div += sol.fluxes[a][tuple(sl_hi)] - sol.fluxes[a][tuple(sl_lo)]
    scale = max(np.abs(sol.fluxes[0]).max(), np.abs(q).max())
    assert np.abs(div - q).max() <= 1e-10 * scale


def test_solve_source_zero_is_zero(two_block_setup):
    grid, part, media = two_block_setup
    sys0 = assemble_block(part, 0, media, np.ones(grid.dims))
    sol = sys0.solve_source(np.zeros((2, 2)))
    assert np.allclose(sol.pressure, 0.0)
    for U in sol.fluxes:
        assert np.allclose(U, 0.0)


def test_source_net_outflow_equals_injection(two_block_setup):
    grid, part, media = two_block_setup
    sys0 = assemble_block(part, 0, media, np.ones(grid.dims))
    q = np.zeros((2, 2))
    q[0, 0] = 1.0
    sol = sys0.solve_source(q)
    out = block_boundary_flux(sol, sys0)
    total_out = sum(v.sum() for v in out.values())
    assert total_out == pytest.approx(1.0)

    q[1, 1] = -1.0  # balanced dipole: zero net outflow
    sol = sys0.solve_source(q)
    out = block_boundary_flux(sol, sys0)
    assert sum(v.sum() for v in out.values()) == pytest.approx(0.0, abs=1e-12)


def test_dirichlet_solve_linearity():
    rng = np.random.default_rng(9)
    grid = build_grid((8, 8))
    part = build_coarse_partition(grid, 4)
    media = synth_media("lognormal", (8, 8), seed=7)
    sys0 = assemble_block(part, 3, media, np.ones(grid.dims))  # interior-corner block
    sides = sys0.skeleton_sides()
    tr1 = {s: rng.normal(size=4) for s in sides}
    tr2 = {s: rng.normal(size=4) for s in sides}
    a, b = 2.0, -0.7
    combo = {s: a * tr1[s] + b * tr2[s] for s in sides}
    s1 = sys0.solve_dirichlet(tr1)
    s2 = sys0.solve_dirichlet(tr2)
    sc = sys0.solve_dirichlet(combo)
    assert np.allclose(sc.pressure, a * s1.pressure + b * s2.pressure, atol=1e-12)
    for ax in range(2):
        assert np.allclose(sc.fluxes[ax], a * s1.fluxes[ax] + b * s2.fluxes[ax], atol=1e-12)


def test_block_reciprocity():
    # pairing of one side's response against another side's indicator is symmetric
    rng = np.random.default_rng(3)
    grid = build_grid((8, 8))
    part = build_coarse_partition(grid, 4)
    media = synth_media("lognormal", (8, 8), seed=11, sigma=1.5)
    sys0 = assemble_block(part, 0, media, np.ones(grid.dims))
    sides = sys0.skeleton_sides()
    mu_i = {s: rng.normal(size=4) for s in sides}
    mu_j = {s: rng.normal(size=4) for s in sides}
    sol_i = sys0.solve_dirichlet(mu_i)
    sol_j = sys0.solve_dirichlet(mu_j)
    out_i = block_boundary_flux(sol_i, sys0)
    out_j = block_boundary_flux(sol_j, sys0)
    pair_ij = sum(np.dot(out_i[s], mu_j[s]) for s in sides)
    pair_ji = sum(np.dot(out_j[s], mu_i[s]) for s in sides)
    assert pair_ij == pytest.approx(pair_ji, rel=1e-12, abs=1e-12)


def test_factorization_reuse_bit_identical():
    grid = build_grid((8, 8))
    part = build_coarse_partition(grid, 4)
    media = synth_media("lognormal", (8, 8), seed=1)
    sys0 = assemble_block(part, 0, media, np.ones(grid.dims), mobility_version=4)
    tr = {s: np.arange(4.0) for s in sys0.skeleton_sides()}
    a = sys0.solve_dirichlet(tr)
    b = sys0.solve_dirichlet(tr)
    assert sys0.mobility_version == 4
    assert np.array_equal(a.pressure, b.pressure)
    for x, y in zip(a.fluxes, b.fluxes):
        assert np.array_equal(x, y)


def test_nonpositive_mobility_rejected(two_block_setup):
    grid, part, media = two_block_setup
    from mortarflow.errors import AssemblyError

    with pytest.raises(AssemblyError):
        assemble_block(part, 0, media, np.zeros(grid.dims))


def test_assemble_blocks_parallel_matches_serial():
    grid = build_grid((12, 12))
    part = build_coarse_partition(grid, 4)
    media = synth_media("lognormal", (12, 12), seed=6)
    mob = np.full(grid.dims, 0.7)
    serial = assemble_blocks(part, media, mob, threads=1)
    parallel = assemble_blocks(part, media, mob, threads=4)
    rng = np.random.default_rng(2)
    for bs, bp in zip(serial, parallel):
        assert bs.block == bp.block
        tr = {s: rng.normal(size=4) for s in bs.skeleton_sides()}
        assert np.array_equal(bs.solve_dirichlet(tr).pressure, bp.solve_dirichlet(tr).pressure)


def test_isolated_block_pins_pressure():
    # a single-block partition has no Dirichlet sides; balanced sources solve,
    # unbalanced ones are rejected
    grid = build_grid((4, 4))
    part = build_coarse_partition(grid, 4)
    media = synth_media("uniform", (4, 4))
    sys0 = assemble_block(part, 0, media, np.ones(grid.dims))
    q = np.zeros((4, 4))
    q[0, 0], q[-1, -1] = 1.0, -1.0
    sol = sys0.solve_source(q)
    div = np.zeros((4, 4))
    for a in range(2):
        sl_hi = [slice(None)] * 2
        sl_lo = [slice(None)] * 2
        sl_hi[a] = slice(1, 5)
        sl_lo[a] = slice(0, 4)
        div += sol.fluxes[a][tuple(sl_hi)] - sol.fluxes[a][tuple(sl_lo)]
    assert np.abs(div - q).max() < 1e-12

    from mortarflow.errors import SolverError

    with pytest.raises(SolverError):
        sys0.solve_source(np.ones((4, 4)))
