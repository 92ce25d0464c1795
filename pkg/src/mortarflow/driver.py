"""Sequential pressure/transport coupling, mortar-space updates and metrics.

One run alternates a pressure solve (coarse mortar method or the fine
reference) with explicit transport over a fixed outer interval.  The coarse
mode starts from one fine-scale solve whose interface traces seed the
enrichment vector; afterwards each step's mortar space is rebuilt from the
polynomials plus the previous step's interface solution, so the space tracks
the evolving mobility field.
"""

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import cell_balance_error, weak_continuity_error
from .errors import ConfigError
from .grid import StructuredGrid, build_grid, build_coarse_partition
from .local_solver import assemble_blocks
from .media import (
    FluidModel,
    MediaField,
    load_media_text,
    load_spe10,
    spe10_model_layers,
    synth_media,
)
from .mortar import build_space, initialize_from_fine
from .pressure import (
    FaceSystem,
    FlowSolution,
    assemble_interface_system,
    fine_solve,
    jacobi_smooth,
    recover_solution,
    solve_interface,
)
from .transport import advance, default_total_rate, make_wells, watercut


@dataclass(frozen=True)
class SimConfig:
    """Full description of one run; mirrors the plain-text config format."""

    model: str = "synthetic"            # synthetic | spe10-1 | spe10-2 | spe10-3 | file
    dims: tuple[int, ...] = (60, 220)
    spacing: tuple[float, ...] = (1.0, 1.0)
    media_kind: str = "channel"         # uniform | layered | lognormal | channel
    media_seed: int = 0
    media_value: float = 1.0
    media_contrast: float = 1.0e3
    media_correlation: float = 3.0
    media_porosity: float = 0.2
    perm_file: str = ""
    poro_file: str = ""
    ratio: int = 10
    mortar_recipe: str = "p0+ms"
    mortar_drop_tol: float = 1.0e-10
    mode: str = "mmmfem"                # mmmfem | fine
    fine_method: str = "direct"         # direct | cg
    solver_tol: float = 1.0e-10
    well_layout: str = "type1"
    well_rate: float = 0.0              # 0 = one pore volume over total_time
    well_completion: str = "mid"
    mu_w: float = 1.0
    mu_o: float = 5.0
    total_time: float = 2000.0
    outer_interval: float = 50.0
    smoothing_iterations: int = 10
    smoothing_damping: float = 2.0 / 3.0
    smoothing_enabled: bool = True
    cfl: float = 0.5
    output_dir: str = ""
    threads: int = 1
    seed: int = 0

    @property
    def n_steps(self) -> int:
        steps = self.total_time / self.outer_interval
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError(
                f"total time {self.total_time} is not a whole number of outer "
                f"intervals of {self.outer_interval}"
            )
        return int(round(steps))


@dataclass
class RunResult:
    """Everything a run produces: one snapshot per outer step plus caches."""

    config: SimConfig
    times: np.ndarray
    snapshots: np.ndarray                 # (n_steps, *dims)
    watercut: np.ndarray
    timings: dict
    dim_reported: int
    lambda_traces: list = field(default_factory=list)   # per step, per interface
    mortar_inputs: list = field(default_factory=list)   # enrichment vectors used per step
    init_traces: list | None = None
    balance_errors: np.ndarray | None = None
    continuity_errors: np.ndarray | None = None
    interface_jump_max: np.ndarray | None = None

    @property
    def n_steps(self) -> int:
        return len(self.times)

    @property
    def flow_stage_seconds(self) -> float:
        """Wall time spent producing velocity fields (everything but transport)."""
        return float(self.timings["total"] - self.timings["transport"])


@dataclass(frozen=True)
class Metrics:
    per_step: np.ndarray
    average: float
    skipped: int = 0


def build_media(config: SimConfig) -> MediaField:
    if config.model == "synthetic":
        return synth_media(
            config.media_kind,
            config.dims,
            seed=config.media_seed,
            value=config.media_value,
            contrast=config.media_contrast,
            correlation=config.media_correlation,
            porosity=config.media_porosity,
        )
    if config.model.startswith("spe10-"):
        model = int(config.model.split("-", 1)[1])
        layers = spe10_model_layers(model)
        if not config.perm_file:
            raise ConfigError(f"model {config.model} needs perm_file (dataset is user-supplied)")
        return load_spe10(
            config.perm_file,
            layers,
            porosity_path=config.poro_file or None,
            porosity=config.media_porosity,
        )
    if config.model == "file":
        if not config.perm_file:
            raise ConfigError("model 'file' needs perm_file")
        return load_media_text(config.perm_file, config.dims)
    raise ConfigError(f"unknown model {config.model!r}")


def _grid_for(config: SimConfig, media: MediaField) -> StructuredGrid:
    spacing = config.spacing
    if len(spacing) != len(media.dims):
        spacing = (1.0,) * len(media.dims)
    return build_grid(media.dims, spacing)


def run(config: SimConfig, media: MediaField | None = None, progress: bool = False) -> RunResult:
    """Execute one full simulation per the configuration."""
    if media is None:
        media = build_media(config)
    grid = _grid_for(config, media)
    fluid = FluidModel(mu_w=config.mu_w, mu_o=config.mu_o)
    rate = config.well_rate or default_total_rate(grid, media, config.total_time)
    wells = make_wells(config.well_layout, grid, rate, completion=config.well_completion)
    source = wells.source_array(grid)
    n_steps = config.n_steps

    timings = {k: 0.0 for k in (
        "fine_init", "blocks", "mortar_space", "interface_assembly",
        "interface_solve", "recovery", "smoothing", "fine_solve", "transport",
    )}
    t_run0 = time.perf_counter()

    coarse = config.mode == "mmmfem"
    if config.mode not in ("mmmfem", "fine"):
        raise ConfigError(f"unknown solver mode {config.mode!r}")

    sat = grid.zeros_cells()
    partition = None
    prev_traces = None
    init_traces = None
    dim_reported = grid.total_faces
    if coarse:
        partition = build_coarse_partition(grid, config.ratio)
        t0 = time.perf_counter()
        flow0 = fine_solve(grid, media, fluid.total_mobility(sat), source,
                           method=config.fine_method, tol=config.solver_tol)
        prev_traces = initialize_from_fine(flow0, partition)
        init_traces = [v.copy() for v in prev_traces]
        timings["fine_init"] += time.perf_counter() - t0

    snapshots = np.zeros((n_steps,) + grid.dims)
    wc = np.zeros(n_steps)
    times = np.zeros(n_steps)
    lambda_traces: list = []
    mortar_inputs: list = []
    balance = np.zeros(n_steps)
    continuity = np.zeros(n_steps)
    jump_max = np.zeros(n_steps)

    for step in range(1, n_steps + 1):
        mob = fluid.total_mobility(sat)
        try:
            if coarse:
                t0 = time.perf_counter()
                blocks = assemble_blocks(partition, media, mob,
                                         mobility_version=step, threads=config.threads)
                timings["blocks"] += time.perf_counter() - t0

                t0 = time.perf_counter()
                space = build_space(partition, config.mortar_recipe, prev_traces,
                                    drop_tol=config.mortar_drop_tol, generation=step)
                mortar_inputs.append([v.copy() for v in prev_traces])
                timings["mortar_space"] += time.perf_counter() - t0

                t0 = time.perf_counter()
                system = assemble_interface_system(space, partition, blocks, source,
                                                   threads=config.threads)
                timings["interface_assembly"] += time.perf_counter() - t0

                t0 = time.perf_counter()
                lam = solve_interface(system, tol=config.solver_tol)
                timings["interface_solve"] += time.perf_counter() - t0

                t0 = time.perf_counter()
                flow = recover_solution(lam, partition, blocks, source,
                                        system=system, threads=config.threads)
                timings["recovery"] += time.perf_counter() - t0

                if step == 1:
                    dim_reported = space.dim
                prev_traces = [tr.copy() for tr in lam.traces]
                lambda_traces.append([tr.copy() for tr in lam.traces])
                balance[step - 1] = cell_balance_error(flow, grid, source, partition)
                continuity[step - 1] = weak_continuity_error(flow, partition)
                jump_max[step - 1] = flow.diagnostics.get("max_interface_jump", 0.0)

                if config.smoothing_enabled and config.smoothing_iterations > 0:
                    t0 = time.perf_counter()
                    face_system = FaceSystem(grid, media, mob, source)
                    flow = jacobi_smooth(flow, face_system, partition, blocks,
                                         iterations=config.smoothing_iterations,
                                         damping=config.smoothing_damping)
                    timings["smoothing"] += time.perf_counter() - t0
            else:
                t0 = time.perf_counter()
                flow = fine_solve(grid, media, mob, source,
                                  method=config.fine_method, tol=config.solver_tol)
                timings["fine_solve"] += time.perf_counter() - t0
                balance[step - 1] = cell_balance_error(flow, grid, source)

            # averaged interface fluxes are conservative only up to half their
            # jump; widen the admissible overshoot accordingly
            slack = 1e-12
            if flow.interface_jumps:
                defect = max((float(np.abs(j).max()) for j in flow.interface_jumps), default=0.0)
                pv_min = float((media.porosity * grid.cell_volume).min())
                slack += config.outer_interval * 0.5 * defect / pv_min

            t0 = time.perf_counter()
            sat = advance(sat, grid, media, fluid, flow.flux, wells,
                          config.outer_interval, cfl=config.cfl, bound_slack=slack)
            timings["transport"] += time.perf_counter() - t0
        except Exception as exc:
            raise type(exc)(f"outer step {step}: {exc}") from exc

        snapshots[step - 1] = sat
        times[step - 1] = step * config.outer_interval
        wc[step - 1] = watercut(sat, fluid, wells) if wells.producers else 0.0
        if progress:
            print(f"step {step:3d}/{n_steps}  t={times[step - 1]:.0f}  wc={wc[step - 1]:.4f}")

    timings["total"] = time.perf_counter() - t_run0
    return RunResult(
        config=config,
        times=times,
        snapshots=snapshots,
        watercut=wc,
        timings=timings,
        dim_reported=dim_reported,
        lambda_traces=lambda_traces,
        mortar_inputs=mortar_inputs,
        init_traces=init_traces,
        balance_errors=balance,
        continuity_errors=continuity,
        interface_jump_max=jump_max,
    )


def saturation_error(run_ms: RunResult, run_ref: RunResult) -> Metrics:
    """Relative volume-weighted L2 saturation error per outer step, and its
    average; instants with an identically zero reference are skipped."""
    if run_ms.snapshots.shape != run_ref.snapshots.shape:
        raise ValueError("runs have different grids or step counts")
    per = np.zeros(run_ms.n_steps)
    skipped = 0
    for i in range(run_ms.n_steps):
        ref = run_ref.snapshots[i]
        diff = run_ms.snapshots[i] - ref
        ref_norm = np.sqrt(np.sum(ref * ref))
        if ref_norm == 0.0:
            warnings.warn(f"reference saturation identically zero at step {i + 1}; skipped")
            per[i] = np.nan
            skipped += 1
            continue
        per[i] = np.sqrt(np.sum(diff * diff)) / ref_norm
    valid = per[~np.isnan(per)]
    avg = float(valid.mean()) if valid.size else float("nan")
    return Metrics(per_step=per, average=avg, skipped=skipped)


def compare_report(run_ms: RunResult, run_ref: RunResult) -> list[dict]:
    """Accuracy/efficiency table rows for a coarse run against its reference."""
    err = saturation_error(run_ms, run_ref)
    rows = [
        {
            "simulator": "fine",
            "basis": "-",
            "n": "-",
            "dim": run_ref.dim_reported,
            "e_s": None,
            "cpu_seconds": run_ref.timings["total"],
            "flow_seconds": run_ref.flow_stage_seconds,
        },
        {
            "simulator": "mortar",
            "basis": run_ms.config.mortar_recipe,
            "n": run_ms.config.ratio,
            "dim": run_ms.dim_reported,
            "e_s": err.average,
            "cpu_seconds": run_ms.timings["total"],
            "flow_seconds": run_ms.flow_stage_seconds,
        },
    ]
    return rows


def format_report(rows: list[dict]) -> str:
    header = f"{'simulator':<10} {'basis':<8} {'n':>4} {'dim':>9} {'e_S':>10} {'cpu[s]':>9} {'flow[s]':>9}"
    lines = [header, "-" * len(header)]
    for r in rows:
        e_s = "-" if r["e_s"] is None else f"{r['e_s']:.4f}"
        lines.append(
            f"{r['simulator']:<10} {r['basis']:<8} {str(r['n']):>4} {r['dim']:>9} "
            f"{e_s:>10} {r['cpu_seconds']:>9.2f} {r['flow_seconds']:>9.2f}"
        )
    return "\n".join(lines)
