"""Permeability/porosity fields and two-phase fluid closures.

Field files are plain whitespace-separated text, ordered x fastest, then y,
then z: the industry-standard layout of the SPE10 dataset (all k_x values,
then k_y, then k_z; porosity in a separate single-block file).
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import MediaDataError, MediaFormatError

SPE10_DIMS = (60, 220, 85)

# zero-porosity cells exist in the SPE10 porosity file; floor them so pore
# volumes stay positive
POROSITY_FLOOR = 1.0e-4

SATURATION_SLACK = 1.0e-10


@dataclass(frozen=True)
class MediaField:
    """Cellwise diagonal permeability tensor and porosity."""

    perm: tuple[np.ndarray, ...]
    porosity: np.ndarray

    def __post_init__(self):
        dims = self.perm[0].shape
        if len(self.perm) != len(dims):
            raise ValueError("need one permeability component per axis")
        for k in self.perm:
            if k.shape != dims:
                raise ValueError("permeability components must share one shape")
            if not np.all(k > 0):
                raise MediaDataError("permeability must be strictly positive")
        if self.porosity.shape != dims:
            raise ValueError("porosity shape must match permeability")
        if not (np.all(self.porosity > 0) and np.all(self.porosity <= 1)):
            raise MediaDataError("porosity must lie in (0, 1]")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.perm[0].shape

    @property
    def ndim(self) -> int:
        return len(self.dims)


@dataclass(frozen=True)
class FluidModel:
    """Immiscible two-phase closures with power-law relative permeabilities.

    Defaults are the quadratic curves k_rw = S^2, k_ro = (1-S)^2 with
    viscosities mu_w = 1, mu_o = 5; residual saturations are zero.
    """

    mu_w: float = 1.0
    mu_o: float = 5.0
    exp_w: float = 2.0
    exp_o: float = 2.0

    def __post_init__(self):
        if self.mu_w <= 0 or self.mu_o <= 0:
            raise ValueError("viscosities must be positive")

    def mobility(self, sat):
        """Water, oil and total mobility at water saturation ``sat``.

        lambda_w = S^2 / mu_w, lambda_o = (1-S)^2 / mu_o (default exponents);
        the total is bounded away from zero for S in [0, 1].
        """
        s = _check_saturation(sat)
        lam_w = s**self.exp_w / self.mu_w
        lam_o = (1.0 - s) ** self.exp_o / self.mu_o
        return lam_w, lam_o, lam_w + lam_o

    def total_mobility(self, sat):
        return self.mobility(sat)[2]

    def fractional_flow(self, sat):
        """Water fraction of the total flux, lambda_w / (lambda_w + lambda_o)."""
        lam_w, _, lam_t = self.mobility(sat)
        return lam_w / lam_t

    def max_fractional_flow_slope(self, samples: int = 4096) -> float:
        """Max |d f_w / dS| over [0, 1], estimated by dense sampling."""
        s = np.linspace(0.0, 1.0, samples + 1)
        f = self.fractional_flow(s)
        return float(np.max(np.abs(np.diff(f))) * samples)


def _check_saturation(sat):
    s = np.asarray(sat, dtype=float)
    if np.any(s < -SATURATION_SLACK) or np.any(s > 1.0 + SATURATION_SLACK):
        bad = s[(s < -SATURATION_SLACK) | (s > 1.0 + SATURATION_SLACK)]
        raise ValueError(f"saturation outside [0, 1]: {bad.flat[0]:.6g}")
    return np.clip(s, 0.0, 1.0)


def mobility(sat, fluid: FluidModel):
    return fluid.mobility(sat)


def fractional_flow(sat, fluid: FluidModel):
    return fluid.fractional_flow(sat)


def _read_values(path) -> np.ndarray:
    try:
        vals = np.fromfile(path, sep=" ", dtype=np.float64)
    except OSError as exc:
        raise MediaFormatError(f"cannot read field file {path}: {exc}") from exc
    if vals.size == 0:
        raise MediaFormatError(f"no numeric data in {path}")
    return vals


def load_spe10(
    path,
    layers: tuple[int, int],
    dataset_dims: tuple[int, int, int] = SPE10_DIMS,
    porosity_path=None,
    porosity: float = 0.2,
) -> MediaField:
    """Load a layer range (1-based, inclusive) of an SPE10-format dataset.

    ``path`` must hold nx*ny*nz values for k_x, then k_y, then k_z.  A single
    selected layer yields a 2D field (k_z dropped).  Without a porosity file
    the porosity is the given constant.
    """
    nx, ny, nz = dataset_dims
    n = nx * ny * nz
    vals = _read_values(path)
    if vals.size != 3 * n:
        raise MediaFormatError(
            f"{path}: expected {3 * n} permeability values for dims {dataset_dims}, "
            f"found {vals.size}"
        )
    lo, hi = layers
    if not (1 <= lo <= hi <= nz):
        raise ValueError(f"layer range {layers} outside 1..{nz}")
    sel = slice(lo - 1, hi)
    comps = [
        vals[i * n : (i + 1) * n].reshape(dataset_dims, order="F")[:, :, sel]
        for i in range(3)
    ]
    if np.any(comps[0] <= 0) or np.any(comps[1] <= 0) or np.any(comps[2] <= 0):
        raise MediaDataError(f"{path}: nonpositive permeability value")

    if porosity_path is not None:
        pvals = _read_values(porosity_path)
        if pvals.size != n:
            raise MediaFormatError(
                f"{porosity_path}: expected {n} porosity values, found {pvals.size}"
            )
        phi = pvals.reshape(dataset_dims, order="F")[:, :, sel]
        phi = np.maximum(phi, POROSITY_FLOOR)
    else:
        phi = np.full((nx, ny, hi - lo + 1), porosity)

    if hi == lo:
        return MediaField(
            perm=(comps[0][:, :, 0].copy(), comps[1][:, :, 0].copy()),
            porosity=phi[:, :, 0].copy(),
        )
    return MediaField(perm=tuple(c.copy() for c in comps), porosity=phi.copy())


def spe10_model_layers(model: int) -> tuple[int, int]:
    """Layer ranges of the three benchmark subsets: the last layer (2D), the
    first 30 layers, and the last 50 layers of the 85-layer dataset."""
    table = {1: (85, 85), 2: (1, 30), 3: (36, 85)}
    if model not in table:
        raise ValueError(f"unknown SPE10 model {model}, expected 1, 2 or 3")
    return table[model]


def synth_media(
    kind: str,
    dims,
    *,
    seed: int | None = None,
    value: float = 1.0,
    contrast: float = 1.0e3,
    sigma: float = 1.0,
    correlation: float = 3.0,
    n_channels: int | None = None,
    porosity: float = 0.2,
) -> MediaField:
    """Deterministic synthetic permeability fields for desk-scale runs.

    kinds: ``uniform`` (constant ``value``), ``layered`` (two-valued bands of
    ratio ``contrast``), ``lognormal`` (filtered Gaussian log-field, std
    ``sigma``, correlation length ``correlation`` cells), ``channel``
    (lognormal background plus sinuous high-permeability channels of ratio
    ``contrast`` along the longest axis).
    """
    dims = tuple(int(n) for n in dims)
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        k = np.full(dims, float(value))
    elif kind == "layered":
        bands = np.arange(dims[-1]) // max(1, dims[-1] // 8)
        low = value / contrast
        line = np.where(bands % 2 == 0, value, low)
        k = np.broadcast_to(line, dims).copy()
    elif kind == "lognormal":
        logk = gaussian_filter(rng.standard_normal(dims), sigma=correlation, mode="nearest")
        std = logk.std()
        if std > 0:
            logk *= sigma / std
        k = value * np.exp(logk)
    elif kind == "channel":
        k = _channel_field(dims, rng, value, contrast, correlation, n_channels)
    else:
        raise ValueError(f"unknown synthetic media kind {kind!r}")
    phi = np.full(dims, float(porosity))
    return MediaField(perm=tuple(k.copy() for _ in range(len(dims))), porosity=phi)


def _channel_field(dims, rng, value, contrast, correlation, n_channels):
    # smooth moderate-variance background
    logk = gaussian_filter(rng.standard_normal(dims), sigma=correlation, mode="nearest")
    std = logk.std()
    if std > 0:
        logk *= 0.75 / std

    long_axis = int(np.argmax(dims[:2])) if len(dims) >= 2 else 0
    cross_axis = 1 - long_axis
    n_long = dims[long_axis]
    n_cross = dims[cross_axis]
    if n_channels is None:
        n_channels = max(2, n_cross // 15)
    log_boost = np.log(contrast)

    mask2d = np.zeros((dims[0], dims[1]), dtype=bool)
    t = np.arange(n_long)
    for _ in range(n_channels):
        x0 = rng.uniform(0.1, 0.9) * n_cross
        amp = rng.uniform(0.05, 0.22) * n_cross
        period = rng.uniform(0.6, 1.6) * n_long
        phase = rng.uniform(0.0, 2 * np.pi)
        width = rng.uniform(1.0, 2.2)
        center = x0 + amp * np.sin(2 * np.pi * t / period + phase)
        for j in range(n_long):
            lo = int(np.floor(center[j] - width))
            hi = int(np.ceil(center[j] + width)) + 1
            lo, hi = max(lo, 0), min(hi, n_cross)
            if lo >= hi:
                continue
            if long_axis == 1:
                mask2d[lo:hi, j] = True
            else:
                mask2d[j, lo:hi] = True

    if len(dims) == 2:
        logk[mask2d] += log_boost
    else:
        # extrude each channel across a band of layers
        nz = dims[2]
        z0 = rng.integers(0, max(1, nz // 2))
        z1 = min(nz, z0 + max(1, nz // 2))
        logk[:, :, z0:z1][mask2d] += log_boost
    return value * np.exp(logk)


def save_media_text(field: MediaField, path) -> None:
    """Write a field in the SPE10-like text layout: permeability components in
    axis order, then porosity, all x fastest."""
    blocks = [k.ravel(order="F") for k in field.perm]
    blocks.append(field.porosity.ravel(order="F"))
    with open(path, "w") as fh:
        for block in blocks:
            for start in range(0, block.size, 6):
                fh.write(" ".join(f"{v:.10e}" for v in block[start : start + 6]))
                fh.write("\n")


def load_media_text(path, dims) -> MediaField:
    """Read a field written by :func:`save_media_text`."""
    dims = tuple(int(n) for n in dims)
    nd = len(dims)
    n = int(np.prod(dims))
    vals = _read_values(path)
    expected = (nd + 1) * n
    if vals.size != expected:
        raise MediaFormatError(
            f"{path}: expected {expected} values for dims {dims}, found {vals.size}"
        )
    comps = tuple(vals[i * n : (i + 1) * n].reshape(dims, order="F").copy() for i in range(nd))
    phi = vals[nd * n :].reshape(dims, order="F").copy()
    return MediaField(perm=comps, porosity=phi)
