"""Scenario files: YAML with a strict schema and unit-suffixed field names.

Every file maps 1:1 onto :class:`~rvzhomotopy.sim.ScenarioConfig`.  Omitted
fields take the nominal defaults; unknown fields are
rejected so a typo never silently falls back to a default.
"""

from __future__ import annotations

from dataclasses import replace

import yaml

from .sim import ConfigError, ScenarioConfig

# file key -> (dataclass field, kind)
SCENARIO_KEYS = {
    "x0_km_kms": ("x0", "vec6"),
    "x_target_km_kms": ("x_target", "vec6"),
    "tf_s": ("tf", "float"),
    "dt_s": ("dt", "float"),
    "u_max_km_s2": ("u_max", "float"),
    "n_rad_s": ("n", "float"),
    "r_nominal_km2": ("R_nominal", "vec3"),
    "q_diag": ("Q", "vec6"),
    "p0_diag": ("P0", "vec6"),
    "t_resolve_s": ("t_resolve", "float"),
    "t_min_rem_s": ("t_min_rem", "float"),
    "controller": ("controller", "str"),
    "fixed_eps": ("fixed_eps", "float"),
    "eps_floor": ("eps_floor", "float"),
    "seed": ("seed", "int"),
    "measurement_noise": ("measurement_noise", "bool"),
    "initial_error": ("initial_error", "bool"),
    "truth_process_noise": ("truth_process_noise", "bool"),
    "max_iters": ("max_iters", "int"),
}
SCHEDULER_KEYS = {
    "beta": ("beta", "float"),
    "m_meas": ("m_meas", "int"),
    "rho_score": ("rho_score", "float"),
    "k_mtf": ("k_mtf", "float"),
    "score_max": ("score_max", "float"),
    "eps_min": ("eps_min", "float"),
    "eps_max": ("eps_max", "float"),
    "alpha_eps": ("alpha_eps", "float"),
}
ANOMALY_KEYS = {
    "t_start_s": ("t_start", "float"),
    "t_end_s": ("t_end", "float"),
    "bias_km": ("bias", "vec3"),
    "noise_scale": ("noise_scale", "float"),
    "outlier_prob": ("outlier_prob", "float"),
    "outlier_scale": ("outlier_scale", "float"),
    "axes": ("axes", "bool3"),
}
SECTIONS = {"scenario": SCENARIO_KEYS, "scheduler": SCHEDULER_KEYS, "anomaly": ANOMALY_KEYS}


def override_paths() -> list:
    return [f"{sec}.{key}" for sec, keys in SECTIONS.items() for key in keys]


def _coerce(path, value, kind):
    try:
        if kind == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind in ("vec3", "vec6"):
            size = int(kind[-1])
            if not isinstance(value, (list, tuple)) or len(value) != size:
                raise TypeError
            return tuple(_coerce(path, v, "float") for v in value)
        if kind == "bool3":
            if not isinstance(value, (list, tuple)) or len(value) != 3:
                raise TypeError
            return tuple(_coerce(path, v, "bool") for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected {kind}, got {value!r}") from None
    raise AssertionError(kind)


def from_mapping(data: dict | None, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a validated config from a nested mapping (the parsed YAML)."""
    cfg = base or ScenarioConfig()
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("top level of a scenario file must be a mapping")
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}; expected {sorted(SECTIONS)}")
    updates = {"scenario": {}, "scheduler": {}, "anomaly": {}}
    for sec, keys in SECTIONS.items():
        block = data.get(sec) or {}
        if not isinstance(block, dict):
            raise ConfigError(f"{sec}: expected a mapping")
        for key, value in block.items():
            if key not in keys:
                raise ConfigError(f"{sec}.{key}: unknown field; valid fields: {sorted(keys)}")
            field_name, kind = keys[key]
            updates[sec][field_name] = _coerce(f"{sec}.{key}", value, kind)
    try:
        sched = replace(cfg.sched, **updates["scheduler"])
        anomaly = replace(cfg.anomaly, **updates["anomaly"])
        cfg = replace(cfg, sched=sched, anomaly=anomaly, **updates["scenario"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def load_scenario(path=None, overrides=()) -> ScenarioConfig:
    """Read a scenario file (or the defaults when ``path`` is None) and apply overrides."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"{path}: YAML parse error{where}: {exc}") from exc
    for item in overrides:
        apply_override(data, item)
    return from_mapping(data)


def apply_override(data: dict, item: str) -> None:
    """Apply ``section.key=value`` (value parsed as YAML) to a nested mapping."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like section.key=value")
    path, raw = item.split("=", 1)
    sec, key = split_path(path.strip())
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {item!r}: cannot parse value") from exc
    data.setdefault(sec, {})
    if data[sec] is None:
        data[sec] = {}
    data[sec][key] = value


def split_path(path: str) -> tuple[str, str]:
    """Resolve ``section.key`` or an unambiguous bare ``key``."""
    if "." in path:
        sec, key = path.split(".", 1)
        if sec in SECTIONS and key in SECTIONS[sec]:
            return sec, key
    else:
        hits = [sec for sec, keys in SECTIONS.items() if path in keys]
        if len(hits) == 1:
            return hits[0], path
    raise ConfigError(f"unknown parameter {path!r}; valid parameters: {', '.join(override_paths())}")


def to_mapping(cfg: ScenarioConfig) -> dict:
    """Inverse of :func:`from_mapping`, for writing a fully explicit scenario file."""
    out = {}
    sources = {"scenario": cfg, "scheduler": cfg.sched, "anomaly": cfg.anomaly}
    for sec, keys in SECTIONS.items():
        obj = sources[sec]
        block = {}
        for key, (field_name, kind) in keys.items():
            value = getattr(obj, field_name)
            block[key] = list(value) if isinstance(value, tuple) else value
        out[sec] = block
    return out


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_mapping(cfg), sort_keys=False)

