"""Quantities with units in scenario files.

A quantity is either a bare number, already in the canonical unit of its
field (km, s, rad and their combinations), or a string ``"<value> <unit>"``.
"""

from __future__ import annotations

import math
import re

# unit -> (factor to canonical, dimension)
UNITS: dict[str, tuple[float, str]] = {
    "km": (1.0, "length"),
    "m": (1e-3, "length"),
    "s": (1.0, "time"),
    "min": (60.0, "time"),
    "h": (3600.0, "time"),
    "day": (86400.0, "time"),
    "rad": (1.0, "angle"),
    "deg": (math.pi / 180.0, "angle"),
    "km/s": (1.0, "speed"),
    "m/s": (1e-3, "speed"),
    "km/s^2": (1.0, "accel"),
    "m/s^2": (1e-3, "accel"),
    "km/s^1.5": (1.0, "accel_noise"),
    "m/s^1.5": (1e-3, "accel_noise"),
    "rad*s^0.5": (1.0, "angle_noise"),
    "deg*s^0.5": (math.pi / 180.0, "angle_noise"),
    "km^3/s^2": (1.0, "gm"),
    "m^3/s^2": (1e-9, "gm"),
    "km^2/s^2.5": (1.0, "kepler_noise"),
    "1/s": (1.0, "rate"),
    "-": (1.0, "none"),
}

CANONICAL = {dim: unit for unit, (fac, dim) in UNITS.items() if fac == 1.0}

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)?\s*$")


class UnitError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def parse_quantity(value, dim: str, path: str = "value") -> float:
    """Canonical float for ``value``; strings must carry a unit of dimension ``dim``."""
    if isinstance(value, bool):
        raise UnitError(path, "expected a number or '<value> <unit>'")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise UnitError(path, "expected a number or '<value> <unit>'")
    m = _QTY.match(value)
    if not m:
        raise UnitError(path, f"cannot parse quantity {value!r}")
    number, unit = float(m.group(1)), m.group(2)
    if unit is None:
        return number
    if unit not in UNITS:
        raise UnitError(path, f"unknown unit {unit!r}")
    fac, udim = UNITS[unit]
    if udim != dim:
        raise UnitError(path, f"unit {unit!r} is a {udim}, expected a {dim} (canonical {CANONICAL.get(dim, '-')})")
    return number * fac


def parse_vector(values, dims, path: str) -> list[float]:
    if len(values) != len(dims):
        raise UnitError(path, f"expected {len(dims)} entries, got {len(values)}")
    return [parse_quantity(v, d, f"{path}[{i}]") for i, (v, d) in enumerate(zip(values, dims))]
