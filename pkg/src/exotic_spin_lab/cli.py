"""Command-line entry point: ``exotic-spin-lab <subcommand> --config <path>``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed acceptance check (``reproduce-paper --check``).  The log level is
read from ``EXOTIC_SPIN_LAB_LOG`` (default WARNING).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
from pathlib import Path
import sys

from . import __version__, workflows
from . import io as aio
from .config import parse_config
from .errors import AcceptanceError, ConfigError, ExoticSpinLabError
from .fields import READOUT_COMPONENT, V45, V1213
from .geometry import CCW, CW
from .pipeline import combine_directions, estimate_from_values, lockin_estimate

log = logging.getLogger("exotic_spin_lab")

LOG_ENV = "EXOTIC_SPIN_LAB_LOG"


class _Run:
    """Shared state of one invocation: config, output dir, manifest."""

    def __init__(self, args):
        self.cfg = parse_config(args.config)
        if args.seed is not None:
            self.cfg = self.cfg.with_values("analysis", seed=args.seed)
        self.deterministic = args.deterministic
        self.inputs = getattr(args, "input", None) or []
        self.out = Path(args.out or self.cfg.get("output", "directory"))
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = aio.RunManifest(self.cfg.config_hash, __version__, args.command,
                                        self.deterministic, self.cfg.seed).start()

    def meta(self, **extra):
        return {"config_hash": self.cfg.config_hash, "seed": self.cfg.seed, **extra}

    def wrote(self, stage, path):
        self.manifest.add(stage, path)
        log.info("wrote %s", path)


def _simulate_field(run: _Run):
    res = workflows.simulate_field(run.cfg, run.deterministic)
    for kernel in (V45, V1213):
        c = READOUT_COMPONENT[kernel]
        s = res.series[kernel]
        meta = run.meta(geometry_hash=s.meta["geometry_hash"])
        run.wrote("simulate-field", aio.write_series(run.out / f"series_{kernel}.csv", s, **meta))
        run.wrote("simulate-field", aio.write_spectrum(
            run.out / f"spectrum_{kernel}.csv", res.spectra[kernel], c, lambda_m=s.lam, f=s.f,
            kernel=kernel, **meta))
        run.wrote("simulate-field", aio.write_spectrum(
            run.out / f"spectrum_rod_{kernel}.csv", res.rod_spectra[kernel], c, lambda_m=s.lam,
            f=s.f, kernel=kernel, source="rod", **run.meta()))
    return res


def _amplifier(run: _Run):
    res = workflows.amplifier_stage(run.cfg)
    run.wrote("amplifier", aio.write_lineshape(run.out / "lineshape.csv", res.nu, res.model_rel,
                                               **run.meta(eta=res.eta)))
    run.wrote("amplifier", aio.write_json(run.out / "amplifier.json",
                                          {**res.to_dict(), "config_hash": run.cfg.config_hash}))
    return res


def _bloch(run: _Run):
    traj = workflows.bloch_stage(run.cfg)
    a = run.cfg.values["amplifier"]
    run.wrote("bloch", aio.write_trajectory(run.out / "trajectory.csv", traj,
                                            **run.meta(drive_amplitude_T=a["drive_amplitude"])))
    return traj


def _lockin(run: _Run):
    kernel = run.cfg.interaction
    if run.inputs:
        return _lockin_from_files(run, kernel)
    res = workflows.lockin_stage(run.cfg, keep_traces=True)
    for direction, tr in res.traces.items():
        run.wrote("lockin", aio.write_trace(run.out / f"trace_{direction}.csv", tr,
                                            **run.meta(kernel=kernel)))
    rows = [(i, d, v) for d, est in (("CW", res.cw), ("CCW", res.ccw))
            for i, v in enumerate(est.values)]
    run.wrote("lockin", aio.write_csv(run.out / "lockin_values.csv", aio.ESTIMATE_COLUMNS, rows,
                                      run.meta(kernel=kernel)))
    run.wrote("lockin", aio.write_json(run.out / "lockin.json", aio.coupling_report(
        res.combined, kernel=kernel, config_hash=run.cfg.config_hash, seed=run.cfg.seed)))
    return res


def _lockin_from_files(run: _Run, kernel):
    """Lock-in on existing trace CSVs (one per direction)."""
    calib = workflows.calibration(run.cfg, kernel)
    est = {}
    for path in run.inputs:
        trace = aio.read_trace(path)
        aio.check_config_hash(trace.meta, run.cfg.config_hash, path)
        win = run.cfg.get("readout", "window_periods")
        vals = lockin_estimate(trace, calib, win)
        quad = lockin_estimate(trace, calib, win, phase_offset=math.pi / 2)
        if trace.direction in est:
            raise ConfigError(f"two input traces for direction {trace.direction}")
        est[trace.direction] = estimate_from_values(vals, trace.direction, quad)
    if set(est) == {CW, CCW}:
        combined = combine_directions(est[CW], est[CCW], run.cfg.get("analysis", "pooling"))
    elif len(est) == 1:
        combined = next(iter(est.values()))
    else:
        raise ConfigError("need one CW and/or one CCW trace")
    run.wrote("lockin", aio.write_json(run.out / "lockin.json", aio.coupling_report(
        combined, kernel=kernel, config_hash=run.cfg.config_hash,
        inputs=[Path(p).name for p in run.inputs])))
    return combined


def _systematics(run: _Run, estimate=None):
    rep = workflows.systematics_stage(run.cfg, estimate)
    run.wrote("systematics", aio.write_json(run.out / "systematics.json",
                                            {**rep.to_dict(), "config_hash": run.cfg.config_hash}))
    return rep


def _constrain(run: _Run, estimate=None, kernel=None):
    kernel = kernel or run.cfg.interaction
    estimate = estimate or workflows.configured_estimate(run.cfg, kernel)
    curve = workflows.constrain_stage(run.cfg, estimate, kernel)
    run.wrote("constrain", aio.write_curve(run.out / f"bound_{kernel}.csv", curve,
                                           **run.meta(lambda_ref_m=run.cfg.get("analysis",
                                                                               "lambda_ref"))))
    run.wrote("constrain", aio.write_json(run.out / f"report_{kernel}.json",
                                          aio.coupling_report(estimate, curve, kernel=kernel,
                                                              config_hash=run.cfg.config_hash)))
    return curve


def _reproduce(run: _Run, check=False):
    fields = _simulate_field(run)
    amp = _amplifier(run)
    _lockin(run)
    _systematics(run)
    for kernel in (V45, V1213):
        _constrain(run, kernel=kernel)
    if check:
        checks = workflows.quick_checks(run.cfg, fields, amp)
        for c in checks:
            print(c.line())
        run.wrote("check", aio.write_json(run.out / "checks.json", [
            {"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks]))
        failed = [c.name for c in checks if not c.passed]
        if failed:
            run.manifest.finish(run.out)
            raise AcceptanceError("failed checks: " + ", ".join(failed))


COMMANDS = {
    "simulate-field": ("field time series and harmonic spectra", _simulate_field),
    "amplifier": ("amplifier lineshape, gain and bandwidth", _amplifier),
    "bloch": ("coupled Bloch trajectory under a resonant drive", _bloch),
    "lockin": ("synthesize traces, lock-in extraction and fit", _lockin),
    "systematics": ("systematic error budget", _systematics),
    "constrain": ("coupling bound versus force range", _constrain),
    "reproduce-paper": ("all stages with the given config", _reproduce),
}


def build_parser():
    p = argparse.ArgumentParser(prog="exotic-spin-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (help_text, _) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="run configuration file")
        sp.add_argument("--out", help="output directory (default: [output] directory)")
        sp.add_argument("--deterministic", action="store_true",
                        help="fixed-order summation and no timestamps, for byte-identical output")
        sp.add_argument("--seed", type=int, help="override the config seed")
        if name == "lockin":
            sp.add_argument("--input", nargs="+", metavar="TRACE",
                            help="analyze existing trace CSVs instead of synthesizing")
        if name == "reproduce-paper":
            sp.add_argument("--check", action="store_true",
                            help="verify golden numbers; exit 4 on failure")
    return p


def _error_json(exc, command):
    return json.dumps({"error": type(exc).__name__, "message": str(exc),
                       "exit_code": getattr(exc, "exit_code", 1), "command": command},
                      sort_keys=True)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        run = _Run(args)
        fn = COMMANDS[args.command][1]
        if args.command == "reproduce-paper":
            fn(run, check=args.check)
        else:
            fn(run)
        run.manifest.finish(run.out)
    except ExoticSpinLabError as exc:
        print(_error_json(exc, args.command), file=sys.stderr)
        return exc.exit_code
    except (FloatingPointError, OverflowError, ArithmeticError) as exc:
        print(_error_json(exc, args.command), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
