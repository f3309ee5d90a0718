"""Unit suffixes accepted in configuration files, with SI conversion factors."""
from __future__ import annotations

import math
import re

from .errors import ConfigError

# suffix -> (dimension, factor to SI)
UNITS = {
    "m": ("length", 1.0),
    "cm": ("length", 1e-2),
    "mm": ("length", 1e-3),
    "kg": ("mass", 1.0),
    "g": ("mass", 1e-3),
    "Hz": ("frequency", 1.0),
    "mHz": ("frequency", 1e-3),
    "T": ("field", 1.0),
    "uT": ("field", 1e-6),
    "nT": ("field", 1e-9),
    "pT": ("field", 1e-12),
    "fT": ("field", 1e-15),
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "min": ("time", 60.0),
    "h": ("time", 3600.0),
    "rad": ("angle", 1.0),
    "deg": ("angle", math.pi / 180.0),
    "V/nT": ("gain", 1.0),
    "T/sqrtHz": ("noise", 1.0),
    "fT/sqrtHz": ("noise", 1e-15),
    "Hz/T": ("gyromagnetic", 1.0),
    "Hz/uT": ("gyromagnetic", 1e6),
    "MHz/T": ("gyromagnetic", 1e6),
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)?\s*$")


def parse_quantity(text, dimension, line=None):
    """``"423 nT"`` -> 4.23e-7 when ``dimension == "field"``.

    A missing or mismatched unit raises ConfigError.
    """
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigError(f"cannot parse {text!r} as a number with a unit", line)
    value, unit = float(m.group(1)), m.group(2)
    if unit is None:
        raise ConfigError(f"value {text!r} has no unit; expected a {dimension} unit", line)
    if unit not in UNITS:
        raise ConfigError(f"unknown unit {unit!r}", line)
    dim, factor = UNITS[unit]
    if dim != dimension:
        raise ConfigError(f"unit {unit!r} is a {dim}, expected a {dimension}", line)
    return value * factor


def parse_number(text, line=None):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a plain number, got {text!r}", line) from None


def units_for(dimension):
    return sorted(u for u, (d, _) in UNITS.items() if d == dimension)
