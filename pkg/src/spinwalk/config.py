"""Flat sectioned key-value configuration files with a typed schema.

Grammar (one entry per line):

    # comment (also allowed after values)
    [section]
    key = value

Sections and keys must belong to the schema below; unknown names and type
errors are rejected with the offending line number. Values are parsed by the
declared type (int, float, str, bool); booleans accept true/false.
"""

from __future__ import annotations

import numpy as np

from .model import ModelSpec, isotropic, rotation2d, rotation4d

SCHEMA = {
    "model": {
        "family": str,
        "d": int,
        "b": float,
        "a": float,
        "U": float,
    },
    "run": {
        "seed": int,
        "replicas": int,
        "n": int,
        "dt": float,
        "threads": int,
        "out": str,
    },
    "stationary": {
        "burn_in": float,
        "thin": float,
        "chains": int,
        "n_samples": int,
    },
    "excursion": {
        "min_lifetime": float,
        "level_low": float,
        "level_high": float,
        "step": float,
        "zero_threshold": float,
    },
    "walk": {
        "noise": str,
        "square_root": str,
    },
}


class ConfigError(ValueError):
    pass


def _parse_scalar(raw: str, typ, lineno: int, key: str):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: cannot parse {key} = {raw!r} as {typ.__name__}") from exc


def parse_config(text: str) -> dict:
    """Parse config text into {section: {key: value}} against the schema."""
    out: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            out.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.rstrip()!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, raw_val = line.partition("=")
        key = key.strip()
        if key not in SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in section [{section}]")
        if key in out[section]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in section [{section}]")
        out[section][key] = _parse_scalar(raw_val, SCHEMA[section][key], lineno, key)
    return out


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def model_from_config(cfg: dict) -> ModelSpec:
    m = cfg.get("model", {})
    family = m.get("family")
    if family is None:
        raise ConfigError("config must set model.family")
    u = m.get("U", 1.0)
    if family == "isotropic":
        return isotropic(m.get("d", 2), U=u)
    if family == "rotation2d":
        return rotation2d(m.get("b", 0.5), U=u)
    if family == "rotation4d":
        return rotation4d(m.get("a", 0.5), U=u)
    raise ConfigError(f"unknown model.family {family!r}")


def model_from_args(family: str, d: int | None = None, b: float | None = None,
                    a: float | None = None, u: float = 1.0) -> ModelSpec:
    if family == "isotropic":
        return isotropic(2 if d is None else d, U=u)
    if family == "rotation2d":
        return rotation2d(0.5 if b is None else b, U=u)
    if family == "rotation4d":
        return rotation4d(0.5 if a is None else a, U=u)
    raise ConfigError(f"unknown model family {family!r}")


def format_float(x: float) -> str:
    """Shortest round-tripping decimal form, stable across platforms."""
    if x != x:
        return "nan"
    return np.format_float_positional(x, unique=True, trim="0")
