"""Run configuration: INI sections with explicit unit suffixes.

Physical values must carry a unit (``pivot_z = 583.2 mm``); bare numbers
are accepted only for dimensionless keys.  Unknown keys, missing units and
out-of-range values raise ConfigError with the offending line number.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
import hashlib
from importlib import resources
import math
from pathlib import Path
import re

import numpy as np

from . import presets
from .amplifier import AmplifierParams, DEFAULT_M0E
from .constants import PhysicalConstants
from .errors import ConfigError
from .fields import V45, V1213
from .geometry import CCW, CW, RotationSpec, SourceSpec
from .pipeline import CL_POLICIES, SystematicRow, lambda_grid
from .units import parse_number, parse_quantity

REQUIRED_SECTIONS = ("geometry", "amplifier", "analysis")
OPTIONAL_SECTIONS = ("constants", "readout", "systematics", "output")


def _spec(kind, default, low=None, high=None, low_inclusive=True):
    return {"kind": kind, "default": default, "low": low, "high": high, "incl": low_inclusive}


# kind: a unit dimension, "number", "int", "bool", "str" or a tuple of choices
SCHEMA = {
    "geometry": {
        "pivot_x": _spec("length", presets.PIVOT[0]),
        "pivot_y": _spec("length", presets.PIVOT[1]),
        "pivot_z": _spec("length", presets.PIVOT[2]),
        "frequency": _spec("frequency", presets.ROTATION_FREQUENCY, 0.0, low_inclusive=False),
        "phase0": _spec("angle", 0.0),
        "direction": _spec((CW, CCW), CW),
        "bgo_edge": _spec("length", presets.BGO_EDGE, 0.0, low_inclusive=False),
        "bgo_mass": _spec("mass", presets.BGO_MASS, 0.0, low_inclusive=False),
        "bgo_nucleons": _spec("number", presets.BGO_NUCLEONS, 0.0, low_inclusive=False),
        "bgo_lever_arm": _spec("length", presets.BGO_LEVER_ARM, 0.0, low_inclusive=False),
        "bgo_resolution": _spec("length", presets.BGO_RESOLUTION, 0.0, low_inclusive=False),
        "rod_length": _spec("length", presets.ROD_LENGTH, 0.0, low_inclusive=False),
        "rod_width": _spec("length", presets.ROD_WIDTH, 0.0, low_inclusive=False),
        "rod_thickness": _spec("length", presets.ROD_THICKNESS, 0.0, low_inclusive=False),
        "rod_mass": _spec("mass", presets.ROD_MASS, 0.0, low_inclusive=False),
        "rod_nucleons": _spec("number", presets.ROD_NUCLEONS, 0.0, low_inclusive=False),
        "rod_resolution": _spec("length", presets.ROD_RESOLUTION, 0.0, low_inclusive=False),
        "samples_per_period": _spec("int", 720, 64),
        "n_harmonics": _spec("int", 6, 1, 30),
        "cell_average": _spec("bool", False),
    },
    "constants": {
        "gamma_option": _spec(("reference", "bias-pair"), "reference"),
        "gamma_n": _spec("gyromagnetic", None, 0.0, low_inclusive=False),
    },
    "amplifier": {
        "bias_field": _spec("field", presets.BIAS_FIELD, 0.0, low_inclusive=False),
        "eta": _spec("number", presets.ETA, 0.0, low_inclusive=False),
        "fwhm": _spec("frequency", presets.FWHM, 0.0, low_inclusive=False),
        "kappa0": _spec("number", presets.KAPPA0, 0.0, low_inclusive=False),
        "xe_polarization": _spec("number", presets.XE_POLARIZATION, 0.0, 1.0, False),
        "t1n": _spec("time", None, 0.0, low_inclusive=False),
        "q": _spec("number", 6.0, 1.0),
        "te": _spec("time", 1e-3, 0.0, low_inclusive=False),
        "p0e": _spec("number", 0.5, 0.0, 1.0),
        "m0e": _spec("field", DEFAULT_M0E, 0.0),
        "drive_amplitude": _spec("field", 13e-12, 0.0),
        "drive_frequency": _spec("frequency", None, 0.0, low_inclusive=False),
        "bloch_duration": _spec("time", 30.0, 0.0, low_inclusive=False),
        "bloch_dt": _spec("time", None, 0.0, low_inclusive=False),
        "record_every": _spec("int", 10, 1),
        "lineshape_span": _spec("frequency", 0.1, 0.0, low_inclusive=False),
        "lineshape_points": _spec("int", 201, 5),
    },
    "readout": {
        "alpha": _spec("gain", presets.ALPHA_V_PER_NT, 0.0, low_inclusive=False),
        "phase_delay": _spec("angle", math.radians(presets.PHASE_DELAY_DEG)),
        "noise_asd": _spec("noise", presets.NOISE_ASD, 0.0),
        "samples_per_period": _spec("int", 64, 4),
        "duration": _spec("time", 3600.0, 0.0, low_inclusive=False),
        "window_periods": _spec("int", 1, 1),
        "common_mode": _spec("field", 0.0, 0.0),
        "common_mode_phase": _spec("angle", 0.0),
    },
    "analysis": {
        "interaction": _spec((V45, V1213), V45),
        "lambda_ref": _spec("length", presets.LAMBDA_REF, 0.0, low_inclusive=False),
        "lambda_min": _spec("length", 0.03, 0.0, low_inclusive=False),
        "lambda_max": _spec("length", 100.0, 0.0, low_inclusive=False),
        "lambda_per_decade": _spec("int", 60, 1),
        "f_true": _spec("number", presets.F45_REFERENCE[0]),
        "seed": _spec("int", 20240101, 0),
        "cl_policy": _spec(tuple(CL_POLICIES), "two-sided-95"),
        "pooling": _spec(("pooled", "averaged"), "pooled"),
        "estimate_mean": _spec("number", None),
        "estimate_sigma_stat": _spec("number", None, 0.0),
        "estimate_sigma_syst": _spec("number", None, 0.0),
        "estimate_quadrature": _spec("number", None),
    },
    "systematics": {
        "rod_lever_transfer": _spec("number", 1.0),
    },
    "output": {
        "directory": _spec("str", "runs"),
    },
}

# systematics rows: name -> unit dimension of "value +plus -minus"
SYSTEMATIC_DIMENSIONS = {
    "bgo_mass": "mass",
    "pivot_x": "length",
    "pivot_y": "length",
    "pivot_z": "length",
    "rod_length": "length",
    "lever_arm": "length",
    "frequency": "frequency",
    "alpha": "gain",
    "phase": "angle",
}

_ROW = re.compile(r"^\s*(\S+)\s+(\S+)\s+\+(\S+)\s+-(\S+)\s*$")


@dataclass(frozen=True)
class RunConfig:
    bgo: SourceSpec
    rod: SourceSpec
    rotation: RotationSpec
    constants: PhysicalConstants
    amplifier: AmplifierParams
    values: dict
    systematics: tuple = ()
    defaults_used: tuple = ()
    source_text: str = ""
    path: str | None = None

    def get(self, section, key):
        return self.values[section][key]

    @property
    def interaction(self) -> str:
        return self.values["analysis"]["interaction"]

    @property
    def seed(self) -> int:
        return self.values["analysis"]["seed"]

    @property
    def lambdas(self):
        a = self.values["analysis"]
        if a["lambda_max"] <= a["lambda_min"]:
            raise ConfigError("lambda_max must exceed lambda_min")
        return lambda_grid(a["lambda_min"], a["lambda_max"], a["lambda_per_decade"])

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.source_text.encode("utf-8")).hexdigest()[:16]

    def with_values(self, section, **changes) -> "RunConfig":
        """Copy with some parsed values overridden (no re-validation of ranges)."""
        values = {k: dict(v) for k, v in self.values.items()}
        values[section].update(changes)
        return _build(values, self.systematics, self.defaults_used, self.source_text, self.path)


def _line_index(text):
    """Map (section, key) -> 1-based line number."""
    index, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip().lower()
            index[(section, None)] = i
            continue
        key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
        index.setdefault((section, key), i)
    return index


def _convert(spec, text, line):
    kind = spec["kind"]
    if isinstance(kind, tuple):
        if text not in kind:
            raise ConfigError(f"{text!r} is not one of {', '.join(kind)}", line)
        return text
    if kind == "str":
        return text
    if kind == "bool":
        low = text.lower()
        if low in ("yes", "true", "on", "1"):
            return True
        if low in ("no", "false", "off", "0"):
            return False
        raise ConfigError(f"expected yes/no, got {text!r}", line)
    if kind == "int":
        try:
            value = int(text)
        except ValueError:
            raise ConfigError(f"expected an integer, got {text!r}", line) from None
    elif kind == "number":
        value = parse_number(text, line)
    else:
        value = parse_quantity(text, kind, line)
    lo, hi = spec["low"], spec["high"]
    if lo is not None and (value < lo or (value == lo and not spec["incl"])):
        raise ConfigError(f"value {text!r} out of range (must be {'>=' if spec['incl'] else '>'} {lo})", line)
    if hi is not None and value > hi:
        raise ConfigError(f"value {text!r} out of range (must be <= {hi})", line)
    return value


def _parse_row(name, text, line):
    if name not in SYSTEMATIC_DIMENSIONS:
        raise ConfigError(f"unknown systematics parameter {name!r}", line)
    m = _ROW.match(text)
    if not m:
        raise ConfigError(f"systematics row must read 'value unit +plus -minus', got {text!r}", line)
    value_s, unit, plus_s, minus_s = m.groups()
    dim = SYSTEMATIC_DIMENSIONS[name]
    value = parse_quantity(f"{value_s} {unit}", dim, line)
    plus = parse_quantity(f"{plus_s} {unit}", dim, line)
    minus = parse_quantity(f"{minus_s} {unit}", dim, line)
    if plus < 0 or minus < 0:
        raise ConfigError("uncertainties must be non-negative", line)
    return SystematicRow(name, value, plus, minus)


def parse_config_text(text, path=None) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"malformed configuration: {exc.message if hasattr(exc, 'message') else exc}",
                          line) from None
    index = _line_index(text)
    sections = [s.lower() for s in parser.sections()]
    missing = [s for s in REQUIRED_SECTIONS if s not in sections]
    if missing:
        raise ConfigError("missing required section(s): " + ", ".join(f"[{s}]" for s in missing))
    for s in sections:
        if s not in SCHEMA:
            raise ConfigError(f"unknown section [{s}]", index.get((s, None)))

    values, defaults_used, rows = {}, [], []
    lever_transfer = 1.0
    for section, keys in SCHEMA.items():
        given = dict(parser.items(section)) if parser.has_section(section) else {}
        values[section] = {}
        for key, text_value in given.items():
            line = index.get((section, key))
            if section == "systematics" and key not in keys:
                rows.append(_parse_row(key, text_value, line))
                continue
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line)
            values[section][key] = _convert(keys[key], text_value.strip(), line)
        for key, spec in keys.items():
            if key not in values[section]:
                values[section][key] = spec["default"]
                defaults_used.append(f"{section}.{key}")
    lever_transfer = values["systematics"]["rod_lever_transfer"]
    rows = tuple(SystematicRow(r.name, r.value, r.plus, r.minus,
                               lever_transfer if r.name == "rod_length" else 1.0) for r in rows)
    return _build(values, rows, tuple(defaults_used), text, path)


def _build(values, rows, defaults_used, text, path) -> RunConfig:
    g, c, a = values["geometry"], values["constants"], values["amplifier"]
    constants = PhysicalConstants.with_gamma_option(c["gamma_option"])
    if c["gamma_n"] is not None:
        constants = constants.with_gamma_hz_per_t(c["gamma_n"])
    bgo = SourceSpec((g["bgo_edge"],) * 3, (0.0, 0.0, -g["bgo_lever_arm"]), g["bgo_mass"],
                     g["bgo_nucleons"], "bgo")
    rod = SourceSpec((g["rod_width"], g["rod_thickness"], g["rod_length"]), (0.0, 0.0, 0.0),
                     g["rod_mass"], g["rod_nucleons"], "rod")
    if g["bgo_lever_arm"] + g["bgo_edge"] / 2 > np.linalg.norm((g["pivot_x"], g["pivot_z"])):
        raise ConfigError("BGO would sweep through the cell: lever arm too long for the pivot")
    rotation = RotationSpec((g["pivot_x"], g["pivot_y"], g["pivot_z"]), presets.ROTATION_NORMAL,
                            g["frequency"], g["direction"], g["phase0"])
    amp = AmplifierParams.calibrated(
        eta=a["eta"], fwhm=a["fwhm"], kappa0=a["kappa0"], P0n=a["xe_polarization"],
        Bz0=a["bias_field"], gamma_n=constants.gamma_n, T1n=a["t1n"], Q=a["q"], Te=a["te"],
        P0e=a["p0e"], M0e=a["m0e"])
    return RunConfig(bgo, rod, rotation, constants, amp, values, tuple(rows), defaults_used,
                     text, None if path is None else str(path))


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} not found")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config file is not UTF-8: {exc}") from None
    return parse_config_text(text, path)


def default_config_text() -> str:
    return resources.files("exotic_spin_lab").joinpath("data/paper_default.cfg").read_text("utf-8")


def default_config() -> RunConfig:
    return parse_config_text(default_config_text(), "paper_default.cfg")
