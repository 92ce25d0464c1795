"""File output: legacy VTK structured-points snapshots, CSV time series, and
a compact npz bundle that `compare` consumes."""

import json
from dataclasses import dataclass

import numpy as np

from .errors import MediaFormatError


@dataclass(frozen=True)
class FieldSnapshot:
    """Named cell arrays on one structured grid."""

    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    arrays: dict

    def __post_init__(self):
        for name, arr in self.arrays.items():
            if arr.shape != tuple(self.dims):
                raise ValueError(f"array {name!r} has shape {arr.shape}, grid is {self.dims}")


def write_vtk(snapshot: FieldSnapshot, path, title: str = "mortarflow fields") -> None:
    """Legacy ASCII structured-points file with one SCALARS block per array.

    DIMENSIONS are point counts (cells + 1 per axis); values are written in
    x-fastest cell order at full double precision.
    """
    dims3 = tuple(snapshot.dims) + (1,) * (3 - len(snapshot.dims))
    spacing3 = tuple(snapshot.spacing) + (1.0,) * (3 - len(snapshot.spacing))
    n_cells = int(np.prod(snapshot.dims))
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {dims3[0] + 1} {dims3[1] + 1} {dims3[2] + 1}\n")
        fh.write("ORIGIN 0 0 0\n")
        fh.write(f"SPACING {spacing3[0]:.17g} {spacing3[1]:.17g} {spacing3[2]:.17g}\n")
        fh.write(f"CELL_DATA {n_cells}\n")
        for name, arr in snapshot.arrays.items():
            fh.write(f"SCALARS {name} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            flat = arr.ravel(order="F")
            for start in range(0, flat.size, 6):
                fh.write(" ".join(f"{v:.17g}" for v in flat[start : start + 6]))
                fh.write("\n")


def read_vtk(path) -> FieldSnapshot:
    """Read back a file written by :func:`write_vtk`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    dims = spacing = None
    arrays = {}
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith("DIMENSIONS"):
            pts = [int(v) for v in line.split()[1:]]
            dims = tuple(p - 1 for p in pts if p > 1)
        elif line.startswith("SPACING"):
            spacing = tuple(float(v) for v in line.split()[1:])
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            i += 2  # skip LOOKUP_TABLE
            vals = []
            n_cells = int(np.prod(dims))
            while len(vals) < n_cells:
                vals.extend(float(v) for v in lines[i].split())
                i += 1
            arrays[name] = np.array(vals).reshape(dims, order="F")
            continue
        i += 1
    if dims is None:
        raise MediaFormatError(f"{path}: not a structured-points VTK file")
    return FieldSnapshot(dims=dims, spacing=spacing[: len(dims)], arrays=arrays)


def write_timeseries(times, values, path) -> None:
    """CSV with a `time,value` header and one row per entry."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise ValueError("time and value arrays must align")
    with open(path, "w") as fh:
        fh.write("time,value\n")
        for t, v in zip(times, values):
            fh.write(f"{t:.17g},{v:.17g}\n")


def read_timeseries(path):
    times, values = [], []
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("time,"):
            raise MediaFormatError(f"{path}: missing time series header")
        for line in fh:
            if not line.strip():
                continue
            t, v = line.split(",")
            times.append(float(t))
            values.append(float(v))
    return np.array(times), np.array(values)


def save_run(result, outdir, write_snapshots: bool = True) -> None:
    """Persist a run: npz bundle, watercut CSV, per-step VTK saturations."""
    import os

    from .config import serialize_config

    os.makedirs(outdir, exist_ok=True)
    np.savez_compressed(
        os.path.join(outdir, "run.npz"),
        snapshots=result.snapshots,
        times=result.times,
        watercut=result.watercut,
        dims=np.array(result.config.dims),
        spacing=np.array(result.config.spacing),
        dim_reported=result.dim_reported,
        timings=json.dumps(result.timings),
        config=serialize_config(result.config),
    )
    write_timeseries(result.times, result.watercut, os.path.join(outdir, "watercut.csv"))
    with open(os.path.join(outdir, "timings.txt"), "w") as fh:
        for key, val in result.timings.items():
            fh.write(f"{key}: {val:.3f} s\n")
        fh.write(f"coarse dim: {result.dim_reported}\n")
    if write_snapshots:
        snapdir = os.path.join(outdir, "snapshots")
        os.makedirs(snapdir, exist_ok=True)
        dims = result.snapshots.shape[1:]
        spacing = result.config.spacing[: len(dims)]
        if len(spacing) != len(dims):
            spacing = (1.0,) * len(dims)
        for i in range(result.snapshots.shape[0]):
            snap = FieldSnapshot(dims=dims, spacing=spacing,
                                 arrays={"saturation": result.snapshots[i]})
            write_vtk(snap, os.path.join(snapdir, f"saturation_{i + 1:04d}.vtk"),
                      title=f"saturation at t={result.times[i]:g}")


class SavedRun:
    """Minimal stand-in for RunResult, loaded from a run directory."""

    def __init__(self, snapshots, times, watercut, timings, dim_reported, config_text):
        self.snapshots = snapshots
        self.times = times
        self.watercut = watercut
        self.timings = timings
        self.dim_reported = dim_reported
        self.config_text = config_text
        from .config import parse_config

        self.config = parse_config(config_text)

    @property
    def n_steps(self):
        return len(self.times)

    @property
    def flow_stage_seconds(self):
        return float(self.timings["total"] - self.timings["transport"])


def load_run(outdir) -> SavedRun:
    import os

    with np.load(os.path.join(outdir, "run.npz"), allow_pickle=False) as data:
        return SavedRun(
            snapshots=data["snapshots"],
            times=data["times"],
            watercut=data["watercut"],
            timings=json.loads(str(data["timings"])),
            dim_reported=int(data["dim_reported"]),
            config_text=str(data["config"]),
        )
