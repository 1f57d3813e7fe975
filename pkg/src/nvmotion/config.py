"""Run-configuration schema, validation and overrides.

Configs are JSON documents with one section per pipeline stage.  Every
physical value carries its unit in the key suffix; ordinary frequencies
(``*_hz``) are converted to angular frequencies exactly once, where the
config is consumed.  Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

from .errors import ConfigError

_NUM = (int, float)


def _spec(type_, default=None, required=False, check=None):
    return {"type": type_, "default": default, "required": required, "check": check}


_POS = ("must be positive", lambda v: v > 0)
_NONNEG = ("must be non-negative", lambda v: v >= 0)
_FRACTION = ("must be in (0, 1]", lambda v: 0 < v <= 1)

SCHEMA: dict[str, dict[str, dict]] = {
    "": {
        "seed": _spec(int, default=12345),
    },
    "output": {
        "directory": _spec(str, default="out"),
        "formats": _spec(list, default=["csv", "json"]),
    },
    "molecule": {
        "path": _spec(str, default="bundled:nhc_ru"),
        "target_atomic_number": _spec(int, default=9),
    },
    "anm": {
        "kappa_kcal_mol_a2": _spec(_NUM, default=1.0, check=_POS),
        "cutoff_a": _spec(_NUM, default=10.0, check=_POS),
        "zeta_per_ps": _spec(_NUM, default=5.0, check=_NONNEG),
        "temperature_k": _spec(_NUM, default=300.0, check=_NONNEG),
        "dt_ps": _spec(_NUM, default=0.002, check=_POS),
        "steps": _spec(int, default=1_000_000, check=_POS),
        "burn_in_ps": _spec(_NUM, default=100.0, check=_NONNEG),
        "record_stride": _spec(int, default=50, check=_POS),
        "wall": _spec(bool, default=True),
        "replicas": _spec(int, default=4, check=_POS),
    },
    "stochastic": {
        "model": _spec(str, default="sphere",
                       check=("must be 'sphere' or 'ou'", lambda v: v in ("sphere", "ou"))),
        "d_r_per_s": _spec(_NUM, default=2.1e9, check=_NONNEG),
        "theta_min_rad": _spec(_NUM, default=0.35, check=_NONNEG),
        "theta_max_rad": _spec(_NUM, default=1.30, check=_POS),
        "radius_m": _spec(_NUM, default=1.2e-9, check=_POS),
        "dt_s": _spec(_NUM, default=1e-10, check=_POS),
        "steps": _spec(int, default=400_000, check=_POS),
        "eta_per_s": _spec(list, default=[1e13, 1e13, 1e13]),
        "d_m2_s": _spec(_NUM, default=1e-9, check=_NONNEG),
        "offset_m": _spec(list, default=[0.0, 0.0, 8e-9]),
        "tau_max_s": _spec(_NUM, default=3e-9, check=_POS),
    },
    "geometry": {
        "nv_depth_m": _spec(_NUM, default=2.0e-9, check=_POS),
        "nv_offset_m": _spec(_NUM, default=1.5e-9, check=_NONNEG),
    },
    "spins": {
        "omega_hz": _spec(_NUM, default=1e6, check=_POS),
        "gamma_n_hz_per_t": _spec(_NUM, default=40.1e6, check=_POS),
        "gamma_flip_hz": _spec(_NUM, default=500.0, check=_NONNEG),
        "delta_hz": _spec(_NUM, default=0.0),
    },
    "detection": {
        "contrast": _spec(_NUM, default=0.05, check=_FRACTION),
        "tau0_s": _spec(_NUM, default=1e-7, check=_NONNEG),
        "j_hz": _spec(_NUM, default=700.0, check=_NONNEG),
        "snr": _spec(_NUM, default=1.0, check=_POS),
        "gamma_flip_grid_hz": _spec(list, default=[250.0, 500.0, 1000.0, 2000.0, 4000.0]),
        "map_z_nv_m": _spec(list, default=[1.5e-9, 2e-9, 2.5e-9, 3e-9, 4e-9]),
        "map_x_nv_m": _spec(list, default=[0.0, 0.5e-9, 1.0e-9, 1.5e-9, 2.0e-9]),
    },
}


def default_config() -> dict:
    cfg: dict[str, Any] = {}
    for section, fields in SCHEMA.items():
        dst = cfg if section == "" else cfg.setdefault(section, {})
        for key, spec in fields.items():
            dst[key] = copy.deepcopy(spec["default"])
    return cfg


def validate_config(cfg: dict) -> dict:
    """Validate against the schema; fill defaults; reject unknown keys."""
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    out = default_config()
    for key, value in cfg.items():
        if key in SCHEMA[""]:
            _check_field("", key, value, SCHEMA[""][key])
            out[key] = value
        elif key in SCHEMA and key != "":
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be an object")
            for sub, sub_val in value.items():
                if sub not in SCHEMA[key]:
                    raise ConfigError(f"unknown key {key}.{sub!r}")
                _check_field(key, sub, sub_val, SCHEMA[key][sub])
                out[key][sub] = sub_val
        else:
            raise ConfigError(f"unknown key {key!r}")
    return out


def _check_field(section: str, key: str, value, spec) -> None:
    name = f"{section}.{key}" if section else key
    type_ = spec["type"]
    if type_ is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
    elif type_ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean, got {value!r}")
    elif type_ is _NUM:
        if not isinstance(value, _NUM) or isinstance(value, bool):
            raise ConfigError(f"{name} must be a number, got {value!r}")
    elif not isinstance(value, type_):
        raise ConfigError(f"{name} must be {type_.__name__}, got {value!r}")
    if spec["check"] is not None:
        msg, fn = spec["check"]
        if not fn(value):
            raise ConfigError(f"{name} {msg}, got {value!r}")


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return default_config()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(raw)


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply ``--set section.key=value`` overrides (JSON-parsed values)."""
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = cfg
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config section in override: {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key in override: {key!r}")
        node[parts[-1]] = value
    return validate_config(cfg)
