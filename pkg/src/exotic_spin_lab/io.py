"""CSV/JSON artifacts with ``#`` metadata headers, and run manifests.

Floats are written with 17 significant digits and metadata keys sorted so
identical inputs give byte-identical files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import FieldTimeSeries, HarmonicSpectrum
from .pipeline import SignalTrace

FLOAT_FMT = "{:.17g}"

SERIES_COLUMNS = ("t_s", "Bx_T", "By_T", "Bz_T")
SPECTRUM_COLUMNS = ("N", "amp_T", "phase_rad")
TRAJECTORY_COLUMNS = ("t_s", "Pex", "Pey", "Pez", "Pnx", "Pny", "Pnz")
LINESHAPE_COLUMNS = ("nu_Hz", "rel_amp")
TRACE_COLUMNS = ("t_s", "signal_V")
CURVE_COLUMNS = ("lambda_m", "bound")
ESTIMATE_COLUMNS = ("period", "direction", "f")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    return str(v)


def write_csv(path, columns, rows, meta=None):
    """Write ``rows`` (2-D array or row iterable) under ``# key: value`` lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {k}: {_fmt(v)}" for k, v in sorted((meta or {}).items())]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_csv(path):
    """Return ``(meta, columns, data)``; metadata values stay strings."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input file {str(path)!r} not found")
    meta, body = {}, []
    for raw in path.read_text(encoding="utf-8").splitlines():
        if raw.startswith("#"):
            key, _, value = raw[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif raw.strip():
            body.append(raw)
    if not body:
        raise ConfigError(f"{path} has no column header")
    columns = tuple(c.strip() for c in body[0].split(","))
    rows = [r.split(",") for r in body[1:]]
    try:
        data = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric or ragged data ({exc})") from None
    return meta, columns, data


def _require_columns(path, columns, expected):
    if tuple(columns) != tuple(expected):
        raise ConfigError(f"{path}: expected columns {','.join(expected)}, got {','.join(columns)}")


def check_config_hash(meta, expected, path="input"):
    """Refuse to chain a stage onto an artifact made with a different config."""
    got = meta.get("config_hash")
    if got is not None and expected is not None and got != expected:
        raise ConfigError(f"{path} was produced with config {got}, current config is {expected}")


# ------------------------------------------------------------ per-artifact

def series_meta(series: FieldTimeSeries, **extra):
    meta = {"lambda_m": series.lam, "f": series.f, "kernel": series.kernel,
            "frequency_Hz": series.frequency}
    meta.update({k: v for k, v in series.meta.items() if isinstance(v, (str, int, float))})
    meta.update(extra)
    return meta


def write_series(path, series: FieldTimeSeries, **meta):
    rows = np.column_stack([series.times, series.samples])
    return write_csv(path, SERIES_COLUMNS, rows, series_meta(series, **meta))


def read_series(path) -> FieldTimeSeries:
    meta, cols, data = read_csv(path)
    _require_columns(path, cols, SERIES_COLUMNS)
    if data.shape[0] < 2:
        raise ConfigError(f"{path}: need at least two samples")
    dt = float(data[1, 0] - data[0, 0])
    return FieldTimeSeries(dt, float(meta["frequency_Hz"]), data[:, 1:], meta.get("kernel", "V45"),
                           float(meta.get("lambda_m", 1.0)), float(meta.get("f", 1.0)),
                           float(data[0, 0]), meta)


def write_spectrum(path, spectrum: HarmonicSpectrum, component, **meta):
    rows = [(int(n), spectrum.amplitude(int(n), component), spectrum.phase(int(n), component))
            for n in spectrum.orders]
    return write_csv(path, SPECTRUM_COLUMNS, rows,
                     {**meta, "component": "xyz"[component], "frequency_Hz": spectrum.frequency})


def read_spectrum(path):
    meta, cols, data = read_csv(path)
    _require_columns(path, cols, SPECTRUM_COLUMNS)
    return meta, data


def write_trajectory(path, traj, **meta):
    return write_csv(path, TRAJECTORY_COLUMNS, traj.to_array(), meta)


def write_lineshape(path, nu, rel, **meta):
    return write_csv(path, LINESHAPE_COLUMNS, np.column_stack([nu, rel]), meta)


def write_trace(path, trace: SignalTrace, **meta):
    m = {"frequency_Hz": trace.frequency, "direction": trace.direction, "dt_s": trace.dt}
    m.update({k: v for k, v in trace.meta.items() if v is not None})
    m.update(meta)
    return write_csv(path, TRACE_COLUMNS, np.column_stack([trace.times, trace.samples]), m)


def read_trace(path, frequency=None, direction=None) -> SignalTrace:
    meta, cols, data = read_csv(path)
    _require_columns(path, cols, TRACE_COLUMNS)
    if data.shape[0] < 2:
        raise ConfigError(f"{path}: need at least two samples")
    nu = frequency if frequency is not None else meta.get("frequency_Hz")
    if nu is None:
        raise ConfigError(f"{path}: rotation frequency missing from metadata")
    dt = float(meta["dt_s"]) if "dt_s" in meta else float(data[1, 0] - data[0, 0])
    return SignalTrace(dt, data[:, 1], float(nu), direction or meta.get("direction", "CW"), meta)


def write_curve(path, curve, **meta):
    return write_csv(path, CURVE_COLUMNS, curve.to_rows(),
                     {"kernel": curve.kernel, "policy": curve.policy,
                      "field_bound_T": curve.field_bound, **meta})


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, NaN to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) or math.isinf(v) else v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def coupling_report(estimate, curve=None, **extra):
    """``{mean, sigma_stat, sigma_syst, per_direction, bound_curve}`` plus extras."""
    report = estimate.to_dict()
    report["bound_curve"] = [] if curve is None else curve.to_rows().tolist()
    report.update(extra)
    return report


@dataclass
class RunManifest:
    config_hash: str
    version: str
    command: str
    deterministic: bool = False
    seed: int | None = None
    outputs: dict = field(default_factory=dict)
    started: str | None = None
    finished: str | None = None

    def start(self):
        if not self.deterministic:
            self.started = datetime.now(timezone.utc).isoformat()
        return self

    def add(self, stage, path):
        self.outputs.setdefault(stage, []).append(Path(path).name)

    def finish(self, out_dir):
        if not self.deterministic:
            self.finished = datetime.now(timezone.utc).isoformat()
        return write_json(Path(out_dir) / "manifest.json", {
            "config_hash": self.config_hash, "version": self.version, "command": self.command,
            "deterministic": self.deterministic, "seed": self.seed, "outputs": self.outputs,
            "started": self.started, "finished": self.finished,
        })
