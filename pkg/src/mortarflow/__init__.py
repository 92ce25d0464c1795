"""Two-phase Darcy flow on structured grids.

The pressure equation is solved either on the fine grid (hybridized
lowest-order mixed elements) or through a small symmetric interface problem
on the coarse block skeleton, whose mortar space combines polynomials with an
enrichment vector carried over from the previous time step's interface
solution.  Saturation transport is explicit upwind finite volumes, coupled
sequentially through the total mobility.
"""

from .driver import (
    Metrics,
    RunResult,
    SimConfig,
    compare_report,
    format_report,
    run,
    saturation_error,
)
from .errors import (
    AssemblyError,
    ConfigError,
    MediaDataError,
    MediaFormatError,
    MortarFlowError,
    SolvabilityError,
    SolverError,
    StabilityError,
)
from .grid import (
    CoarsePartition,
    Interface,
    StructuredGrid,
    build_coarse_partition,
    build_grid,
    interface_trace_coordinates,
)
from .local_solver import (
    LocalBlockSystem,
    LocalSolution,
    assemble_block,
    assemble_blocks,
    block_boundary_flux,
)
from .media import (
    FluidModel,
    MediaField,
    fractional_flow,
    load_media_text,
    load_spe10,
    mobility,
    save_media_text,
    spe10_model_layers,
    synth_media,
)
from .mortar import (
    MortarSolution,
    MortarSpace,
    build_multiscale_basis,
    build_polynomial_basis,
    build_space,
    initialize_from_fine,
)
from .pressure import (
    FaceSystem,
    FlowSolution,
    InterfaceSystem,
    assemble_interface_system,
    fine_solve,
    jacobi_smooth,
    recover_solution,
    solve_interface,
)
from .transport import (
    Well,
    WellConfig,
    advance,
    cfl_dt,
    default_total_rate,
    make_wells,
    pore_volume,
    watercut,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
