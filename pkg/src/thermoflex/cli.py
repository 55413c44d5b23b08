"""Command line entry point: ``thermoflex <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .capability import qualification_terms
from .control import ControllerConfig
from .errors import ConfigurationError, ParameterError, SignalError, ThermoflexError
from .scenario import load_scenario
from .signals import DEFAULT_T50_PROFILE
from .simulation import read_trace_spin, run_simulation, run_t50, summarize, sweep_rr

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("thermoflex")


def _configure_logging() -> None:
    name = os.environ.get("THERMOFLEX_LOG", "warn").strip().lower()
    level = _LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if level is None:
        log.warning("ignoring THERMOFLEX_LOG=%r; expected one of %s", name, ", ".join(_LOG_LEVELS))


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=False))


def _t50_profile(scenario):
    if scenario.signal.kind == "t50" and scenario.signal.profile is not None:
        return scenario.signal.profile
    return DEFAULT_T50_PROFILE


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    trace, stats = run_simulation(scenario, args.dispatch)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace.write_csv(out / "trace.csv")
    (out / "stats.json").write_text(json.dumps(stats.as_dict(), indent=2) + "\n")
    if args.emit_plotdata:
        trace.write_plotdata(out / "plotdata")
    _emit(stats.as_dict())
    return EXIT_OK


def cmd_t50(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.rr < 0:
        raise ConfigurationError(f"--rr must be non-negative, got {args.rr}")
    results = []
    for spec, fleet in zip(scenario.buildings, scenario.fleets()):
        result = run_t50(fleet.params, args.rr, _t50_profile(scenario), scenario.dt,
                         ControllerConfig(spec.controller.gain, spec.controller.x_floor))
        if args.emit_plotdata:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            result.write_plotdata(out / f"t50_{spec.name}_long.csv", spec.name)
        results.append({"building": spec.name, **result.summary()})
    _emit(results)
    return EXIT_OK


def cmd_qualify(args) -> int:
    scenario = load_scenario(args.scenario)
    rows = []
    for spec, fleet in zip(scenario.buildings, scenario.fleets()):
        long_term, short_term = qualification_terms(fleet.params, args.k)
        rows.append({
            "building": spec.name,
            "long_term": long_term,
            "short_term": short_term,
            "r_qual": min(long_term, short_term),
            "binding": "long_term" if long_term <= short_term else "short_term",
        })
    _emit(rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    rows = []
    for spec, fleet in zip(scenario.buildings, scenario.fleets()):
        result = sweep_rr(fleet.params, args.start, args.stop, args.steps,
                          profile=_t50_profile(scenario), dt=scenario.dt,
                          controller=ControllerConfig(spec.controller.gain, spec.controller.x_floor))
        rows.append({
            "building": spec.name,
            "r_r_max": result.r_r_max,
            "boundary": result.boundary,
            "boundary_ratio": result.boundary_ratio,
            "runs": [{"multiplier": float(m), "passed": bool(p)}
                     for m, p in zip(result.multipliers, result.passed)],
        })
    _emit(rows)
    return EXIT_OK


def cmd_stats(args) -> int:
    try:
        spins, dt = read_trace_spin(args.trace)
    except OSError as exc:
        raise ConfigurationError(f"cannot read trace: {exc}") from exc
    _emit(summarize(spins, dt).as_dict())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermoflex", description="Building-fleet frequency regulation simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write trace.csv and stats.json")
    p.add_argument("scenario")
    p.add_argument("--out", default="out")
    p.add_argument("--dispatch", choices=("optimized", "proportional"), default=None)
    p.add_argument("--emit-plotdata", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("t50", help="run the T-50 qualification test on each building")
    p.add_argument("scenario")
    p.add_argument("--rr", type=float, required=True, help="regulation capacity R_r (appliances)")
    p.add_argument("--out", default="out")
    p.add_argument("--emit-plotdata", action="store_true")
    p.set_defaults(func=cmd_t50)

    p = sub.add_parser("qualify", help="closed-form T-50 capacity of each building")
    p.add_argument("scenario")
    p.add_argument("--k", type=float, default=5.0, help="response time in minutes, 0 < k <= 5")
    p.set_defaults(func=cmd_qualify)

    p = sub.add_parser("sweep-rr", help="T-50 pass/fail over multiples of the closed-form capacity")
    p.add_argument("scenario")
    p.add_argument("--from", dest="start", type=float, default=0.5, help="lowest multiple of R_r,max")
    p.add_argument("--to", dest="stop", type=float, default=1.5, help="highest multiple of R_r,max")
    p.add_argument("--steps", type=int, default=41)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="spinning-reserve statistics of a trace file")
    p.add_argument("trace")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ParameterError, SignalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ThermoflexError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
