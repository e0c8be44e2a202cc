"""Command-line entry point: ``backaction <command> [options] --out FILE``.

Exit status is 0 on success, 2 for invalid input or configuration and 3
when a fit fails.  A JSON run report is written to standard error.
"""

from __future__ import annotations

import argparse
from dataclasses import asdict, dataclass, field
import json
import sys
import time

import numpy as np

from . import __version__
from .estimation import (
    SweepPoint,
    calibrate_coupling,
    fit_detuning_sweep,
    fit_lorentzian,
    temperature_from_area,
)
from .experiment import (
    cooling_curve,
    sweep_constant_circulating,
    sweep_constant_incident,
)
from .io import (
    CSVFormatError,
    ConfigError,
    UnitError,
    load_config,
    read_calibration_points,
    read_spectrum,
    read_sweep,
    write_calibration_points,
    write_cooling,
    write_json,
    write_spectrum,
    write_sweep,
)
from .lsq import FitError
from .physics import TWO_PI
from .spectra import (
    imprecision_floor,
    linewidth_grid,
    mean_square_displacement,
    synth_spectrum,
    thermal_model,
)

EXIT_OK, EXIT_INVALID, EXIT_FIT = 0, 2, 3

DEFAULT_COOL_POWERS = (46e-12, 7.3e-6)
DEFAULT_CAL_TEMPS = (0.050, 0.075, 0.100, 0.125, 0.150, 0.175, 0.200, 0.225, 0.250)


@dataclass
class RunReport:
    command: str
    config_digest: str
    seeds: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    wall_time: float = 0.0
    version: str = __version__
    status: str = "ok"
    error: str | None = None


class UsageError(ValueError):
    pass


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _decades(text):
    try:
        a, b, n = text.split(":")
        return np.logspace(float(a), float(b), int(n)).tolist()
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:n, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="backaction", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="TOML config file or 'paper_device' "
                   "(default: $BACKACTION_CONFIG, else paper_device)")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="damping and spring shift versus detuning")
    s.add_argument("--mode", choices=["const-circulating", "const-incident"],
                   default="const-circulating")
    s.add_argument("--power", type=float, help="P_c or P_i in W (default 9e-7 / 1e-7)")
    s.add_argument("--from", dest="start", type=float, help="first detuning (Hz)")
    s.add_argument("--to", dest="stop", type=float, help="last detuning (Hz)")
    s.add_argument("--points", type=int, default=401)
    s.add_argument("--out", required=True)

    c = sub.add_parser("cool", help="cooling at the optimal detuning versus power")
    g = c.add_mutually_exclusive_group()
    g.add_argument("--powers", type=_float_list, help="comma-separated P_c values (W)")
    g.add_argument("--decades", type=_decades, help="log10 range a:b:n of P_c (W)")
    c.add_argument("--heating", action="store_true", help="apply the config heating model")
    c.add_argument("--kerr", action="store_true", help="apply the config Kerr pull")
    c.add_argument("--out", required=True)

    y = sub.add_parser("synth", help="synthesise an averaged thermal-noise spectrum")
    y.add_argument("--temp", type=float, help="mode temperature (K, default T_0)")
    y.add_argument("--navg", type=int, default=100)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--span", type=float, help="frequency span (Hz, default 20 linewidths)")
    y.add_argument("--points", type=int, default=801)
    y.add_argument("--power", type=float, help="P_c setting the imprecision floor (W)")
    y.add_argument("--unit", choices=["displacement", "cavity_frequency"],
                   default="displacement")
    y.add_argument("--out", required=True)

    yc = sub.add_parser("synth-calibration",
                        help="synthesise <delta f^2> versus temperature points")
    yc.add_argument("--temps", type=_float_list, default=list(DEFAULT_CAL_TEMPS))
    yc.add_argument("--noise", type=float, default=0.05, help="relative point noise")
    yc.add_argument("--offset", type=float, default=0.0, help="constant background (Hz^2)")
    yc.add_argument("--seed", type=int, default=0)
    yc.add_argument("--out", required=True)

    for name, help_ in (("fit-spectrum", "Lorentzian fit of a spectrum CSV"),
                        ("calibrate-g", "coupling from a calibration CSV"),
                        ("fit-sweep", "circulating power from a sweep CSV")):
        f = sub.add_parser(name, help=help_)
        f.add_argument("--input", required=True)
        f.add_argument("--out", required=True)
    return p


def _cmd_sweep(args, cfg, report):
    fm = cfg.system.mech.omega_m / TWO_PI
    if args.mode == "const-circulating":
        power = 9e-7 if args.power is None else args.power
        start = -2 * fm if args.start is None else args.start
        stop = 2 * fm if args.stop is None else args.stop
    else:
        power = 1e-7 if args.power is None else args.power
        start = -3 * fm if args.start is None else args.start
        stop = -fm / 100 if args.stop is None else args.stop
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    grid = TWO_PI * np.linspace(start, stop, args.points)
    if args.mode == "const-circulating":
        result = sweep_constant_circulating(power, grid, cfg.system)
    else:
        result = sweep_constant_incident(power, grid, cfg.system, cfg.kerr)
    write_sweep(args.out, result)


def _cmd_cool(args, cfg, report):
    powers = args.powers or args.decades or np.geomspace(*DEFAULT_COOL_POWERS, 12).tolist()
    result = cooling_curve(
        powers, cfg.system,
        heating=cfg.heating if args.heating else None,
        kerr=cfg.kerr if args.kerr else None,
        noise=cfg.noise,
    )
    write_cooling(args.out, result)


def _cmd_synth(args, cfg, report):
    mech = cfg.system.mech
    T = cfg.system.env.T_0 if args.temp is None else args.temp
    fm, fw = mech.omega_m / TWO_PI, mech.gamma_m0 / TWO_PI
    span = 20 * fw if args.span is None else args.span
    if not span > 0 or args.points < 8 or args.navg < 1:
        raise UsageError("--span must be > 0, --points >= 8 and --navg >= 1")
    grid = linewidth_grid(fm, span, 1.0, args.points)
    power = cfg.noise.P_ref if args.power is None else args.power
    floor = imprecision_floor(power, cfg.noise)
    g = None
    if args.unit == "cavity_frequency":
        g = cfg.system.coupling.g
        floor = floor * (g / TWO_PI) ** 2
    true = thermal_model(grid, T, mech.gamma_m0, mech, floor=floor, g=g)
    trace = synth_spectrum(true, grid, args.navg, seed=args.seed, unit_tag=args.unit,
                           provenance={"T_m": T, "P_c": power, "config": cfg.digest})
    report.seeds.append(args.seed)
    write_spectrum(args.out, trace)


def _cmd_synth_calibration(args, cfg, report):
    mech, g = cfg.system.mech, cfg.system.coupling.g
    T = np.asarray(args.temps, dtype=float)
    truth = (g / TWO_PI) ** 2 * mean_square_displacement(T, mech) + args.offset
    rng = np.random.Generator(np.random.PCG64(args.seed))
    y = truth * (1.0 + args.noise * rng.standard_normal(T.size))
    report.seeds.append(args.seed)
    write_calibration_points(args.out, T, y, meta={"noise": args.noise, "seed": args.seed,
                                                   "rng": "numpy.random.PCG64"})


def _cmd_fit_spectrum(args, cfg, report):
    trace = read_spectrum(args.input)
    fit = fit_lorentzian(trace)
    out = fit.to_dict()
    out["unit_tag"] = trace.unit_tag
    if trace.unit_tag == "displacement":
        out["derived"] = {
            "T_m_k": float(temperature_from_area(fit.params["area"], cfg.system.mech)),
            "gamma_m_hz": fit.params["fwhm"],
        }
    else:
        out["derived"] = {"mean_square_freq_hz2": fit.params["area"],
                          "gamma_m_hz": fit.params["fwhm"]}
    write_json(args.out, {"kind": "lorentzian_fit", **out})


def _cmd_calibrate_g(args, cfg, report):
    T, y, sigma = read_calibration_points(args.input)
    cal = calibrate_coupling(T, y, cfg.system.mech, sigmas=sigma)
    write_json(args.out, {"kind": "coupling_calibration", **cal.to_dict()})


def _cmd_fit_sweep(args, cfg, report):
    sweep = read_sweep(args.input)
    points = [SweepPoint(d, gm, om) for d, gm, om in
              zip(sweep.detuning, sweep.gamma_m, sweep.Omega)]
    fit = fit_detuning_sweep(points, cfg.system)
    write_json(args.out, {"kind": "sweep_fit", **fit.to_dict()})


COMMANDS = {
    "sweep": _cmd_sweep,
    "cool": _cmd_cool,
    "synth": _cmd_synth,
    "synth-calibration": _cmd_synth_calibration,
    "fit-spectrum": _cmd_fit_spectrum,
    "calibrate-g": _cmd_calibrate_g,
    "fit-sweep": _cmd_fit_sweep,
}


def run_command(argv=None, stderr=None) -> int:
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse reports bad flags with status 2
        return int(exc.code or 0)
    t0 = time.perf_counter()
    report = RunReport(command=args.command, config_digest="")
    code = EXIT_OK
    try:
        cfg = load_config(args.config)
        report.config_digest = cfg.digest
        COMMANDS[args.command](args, cfg, report)
        report.outputs.append(args.out)
    except FitError as exc:
        code, report.status, report.error = EXIT_FIT, "fit_failed", str(exc)
    except (ConfigError, UnitError, CSVFormatError, UsageError, ValueError, OSError) as exc:
        code, report.status, report.error = EXIT_INVALID, "invalid_input", str(exc)
    report.wall_time = time.perf_counter() - t0
    print(json.dumps(asdict(report), sort_keys=True), file=stderr)
    return code


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
