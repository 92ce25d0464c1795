"""Plain-text run configuration: one `key = value` per line, dotted keys.

The format is schema-checked: unknown keys are rejected and
parse(serialize(config)) reproduces the configuration exactly.
"""

from dataclasses import fields, replace

from .driver import SimConfig
from .errors import ConfigError

# config key -> (SimConfig field, type tag)
SCHEMA = {
    "model": ("model", "str"),
    "grid.dims": ("dims", "ints"),
    "grid.spacing": ("spacing", "floats"),
    "media.kind": ("media_kind", "str"),
    "media.seed": ("media_seed", "int"),
    "media.value": ("media_value", "float"),
    "media.contrast": ("media_contrast", "float"),
    "media.correlation": ("media_correlation", "float"),
    "media.porosity": ("media_porosity", "float"),
    "media.perm_file": ("perm_file", "str"),
    "media.poro_file": ("poro_file", "str"),
    "coarse.ratio": ("ratio", "int"),
    "mortar.recipe": ("mortar_recipe", "str"),
    "mortar.drop_tol": ("mortar_drop_tol", "float"),
    "solver.mode": ("mode", "str"),
    "solver.fine_method": ("fine_method", "str"),
    "solver.tol": ("solver_tol", "float"),
    "wells.layout": ("well_layout", "str"),
    "wells.rate": ("well_rate", "float"),
    "wells.completion": ("well_completion", "str"),
    "fluid.mu_w": ("mu_w", "float"),
    "fluid.mu_o": ("mu_o", "float"),
    "time.total": ("total_time", "float"),
    "time.outer_interval": ("outer_interval", "float"),
    "smoothing.iterations": ("smoothing_iterations", "int"),
    "smoothing.damping": ("smoothing_damping", "float"),
    "smoothing.enabled": ("smoothing_enabled", "bool"),
    "transport.cfl": ("cfl", "float"),
    "output.dir": ("output_dir", "str"),
    "threads": ("threads", "int"),
    "seed": ("seed", "int"),
}


def _parse_value(text: str, kind: str):
    text = text.strip()
    try:
        if kind == "str":
            return text
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            if text.lower() in ("true", "1", "yes", "on"):
                return True
            if text.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "ints":
            return tuple(int(v) for v in text.split())
        if kind == "floats":
            return tuple(float(v) for v in text.split())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {text!r} as {kind}") from exc
    raise ConfigError(f"unknown schema kind {kind}")


def _format_value(value, kind: str) -> str:
    if kind in ("ints", "floats"):
        return " ".join(repr(v) for v in value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    return str(value)


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    cfg = base or SimConfig()
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, kind = SCHEMA[key]
        updates[attr] = _parse_value(value, kind)
    return replace(cfg, **updates)


def serialize_config(config: SimConfig) -> str:
    lines = []
    for key, (attr, kind) in SCHEMA.items():
        lines.append(f"{key} = {_format_value(getattr(config, attr), kind)}")
    return "\n".join(lines) + "\n"


def load_config(path) -> SimConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def save_config(config: SimConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_config(config))
