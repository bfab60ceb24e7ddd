from __future__ import annotations

import json
import math
import os
import re
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from pydantic import BaseModel

from .exceptions import ConfigError

DEFAULT_SEED = 20130101
DEFAULT_THREADS = 1

# unit -> (factor to SI, dimension)
UNITS: dict[str, tuple[float, str]] = {
    "m": (1.0, "length"),
    "km": (1e3, "length"),
    "cm": (1e-2, "length"),
    "mm": (1e-3, "length"),
    "um": (1e-6, "length"),
    "µm": (1e-6, "length"),
    "nm": (1e-9, "length"),
    "angstrom": (1e-10, "length"),
    "Å": (1e-10, "length"),
    "pm": (1e-12, "length"),
    "fm": (1e-15, "length"),
    "kg": (1.0, "mass"),
    "g": (1e-3, "mass"),
    "mg": (1e-6, "mass"),
    "u": (1.66053906660e-27, "mass"),
    "s": (1.0, "time"),
    "ms": (1e-3, "time"),
    "us": (1e-6, "time"),
    "ns": (1e-9, "time"),
    "min": (60.0, "time"),
    "h": (3600.0, "time"),
    "Hz": (1.0, "rate"),
    "/s": (1.0, "rate"),
    "1/s": (1.0, "rate"),
    "/h": (1.0 / 3600.0, "rate"),
    "kg/m3": (1.0, "density"),
    "kg/m^3": (1.0, "density"),
    "g/cm3": (1e3, "density"),
    "g/cm^3": (1e3, "density"),
    "J": (1.0, "energy"),
    "erg": (1e-7, "energy"),
    "J s": (1.0, "action"),
    "J*s": (1.0, "action"),
}

_QUANTITY_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def parse_quantity(value: Any, dimension: str | None = None) -> float:
    """
    Convert a number or a unit-suffixed string ("1e-12 cm") to SI.

    Bare numbers are taken as SI already. When dimension is given, a suffix of
    another dimension is rejected.
    """
    if isinstance(value, bool):
        raise ConfigError(f"expected a quantity, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected a quantity, got {value!r}")

    match = _QUANTITY_RE.match(value)
    if not match:
        raise ConfigError(f"cannot parse quantity {value!r}")
    number, unit = float(match.group(1)), match.group(2)
    if not unit:
        return number
    if unit not in UNITS:
        raise ConfigError(f"unknown unit {unit!r} in {value!r}")
    factor, unit_dimension = UNITS[unit]
    if dimension is not None and unit_dimension != dimension:
        raise ConfigError(f"{value!r} is a {unit_dimension}, expected a {dimension}")
    return number * factor


def format_float(value: float) -> str:
    """
    17 significant digits in scientific notation, '.' decimal, inf/nan spelled out.
    """
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return f"{value:.16e}"


def json_default_serializer(obj: Any) -> Any:
    """
    Serializer that can handle Pydantic models and numpy values.
    """
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"Object of type {type(obj)} is not JSON serializable")


def load_settings(path: Path) -> dict[str, Any]:
    """
    Load a scenario document (expects a JSON object).
    """

    resolved = path.expanduser()
    if not resolved.exists():
        raise ConfigError(f"Config file {resolved} does not exist.")
    if resolved.is_dir():
        raise ConfigError(f"Config path {resolved} is a directory, expected a file.")

    try:
        raw = resolved.read_text(encoding="utf-8").strip()
    except OSError as exc:
        raise ConfigError(f"Failed to read config file {resolved}: {exc}") from exc

    if not raw:
        raise ConfigError(f"Config file {resolved} is empty.")

    try:
        parsed = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file must be valid JSON: {exc}") from exc

    if not isinstance(parsed, dict):
        raise ConfigError("Config file must contain a JSON object at the top level.")

    return parsed


def coerce_int(*candidates: Any, default: int, name: str) -> int:
    """
    Return the first non-null candidate as an int; fall back to default.
    """
    for candidate in candidates:
        if candidate is None or candidate == "":
            continue
        if isinstance(candidate, bool):
            raise ConfigError(f"{name} must be an integer")
        if isinstance(candidate, int):
            return candidate
        if isinstance(candidate, str):
            try:
                return int(candidate)
            except ValueError as exc:
                raise ConfigError(f"{name} must be an integer") from exc
        raise ConfigError(f"{name} must be an integer")
    return default


def resolve_run_settings(
    seed: int | str | None = None,
    threads: int | str | None = None,
    scenario_seed: int | None = None,
    env: Mapping[str, str] | None = None,
) -> tuple[int, int]:
    """
    Resolve (seed, threads) with the CLI precedence:
    explicit args > environment > scenario file > defaults.
    """
    env_map = os.environ if env is None else env
    resolved_seed = coerce_int(seed, env_map.get("COLLAPSE_LAB_SEED"), scenario_seed, default=DEFAULT_SEED, name="seed")
    resolved_threads = coerce_int(threads, env_map.get("COLLAPSE_LAB_THREADS"), default=DEFAULT_THREADS, name="threads")
    if resolved_seed < 0 or resolved_seed >= 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    if resolved_threads < 1:
        raise ConfigError("threads must be at least 1")
    return resolved_seed, resolved_threads
