"""Command-line interface: ``pinctrl {simulate,certify,sweep,reproduce}``.

Exit codes: 0 success (or certified), 1 not certified / reproduction check
failed, 2 assumption estimation failed, 64 usage or scenario error, 70
runtime fault.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from . import __version__
from .certify import EstimationError, certify_scenario
from .records import append_sweep_row, summarize, sweep_row, write_summary, write_timeseries
from .scenario import ScenarioError, bundled_scenarios, resolve_scenario, scenario_from_dict
from .simulate import SimulationFault, check_proof_bounds, simulate

log = logging.getLogger("pinctrl")

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 1
EXIT_ESTIMATION = 2
EXIT_USAGE = 64
EXIT_SOFTWARE = 70
OUT_ENV = "PINCTRL_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _out_dir(args, name: str) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV]) / name
    return Path("runs") / name


def _load(args):
    sc = resolve_scenario(args.scenario)
    return sc.with_overrides(dt=args.dt, t_end=args.t_end, gain=getattr(args, "gain", None), seed=args.seed)


def _format_certificate(cert) -> str:
    d = cert.to_dict()
    lines = []
    for key in ("verdict", "lambda_max", "theta_f", "theta_h", "c", "norm_L_kron", "bracket",
                "gain", "min_gain", "pin_mask"):
        lines.append(f"{key}: {d[key]}")
    for key, value in d["provenance"].items():
        if key != "region":
            lines.append(f"provenance.{key}: {value}")
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    sc = _load(args)
    out = _out_dir(args, sc.name)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.yaml").write_text(sc.to_yaml())
    try:
        record = simulate(sc)
    except SimulationFault as fault:
        if fault.record is not None and len(fault.record):
            write_timeseries(fault.record, out / "timeseries.partial.csv")
        print(f"simulation fault: {fault}", file=sys.stderr)
        return EXIT_SOFTWARE
    write_timeseries(record, out / "timeseries.csv")

    cert = report = None
    if not args.no_certify:
        try:
            cert = certify_scenario(sc)
            report = check_proof_bounds(record, cert)
        except EstimationError as exc:
            log.warning("certificate unavailable: %s", exc)
    summary = summarize(record, cert, report, scenario=sc.name, seed=sc.seed)
    write_summary(summary, out / "summary.json")

    if not args.no_plots:
        from .plotting import emit_plots
        try:
            emit_plots(record, summary, out, sc.model.dynamics, sc.reference_model.dynamics)
        except OSError as exc:
            print(f"plotting failed: {exc}", file=sys.stderr)
            return EXIT_SOFTWARE
    print(f"{sc.name}: final error {summary.final_error_norm:.6g} "
          f"(initial {summary.initial_error_norm:.6g}); "
          f"{cert.verdict if cert else 'no certificate'}; outputs in {out}")
    return EXIT_OK


def cmd_certify(args) -> int:
    sc = _load(args)
    try:
        cert = certify_scenario(sc, samples=args.samples)
    except EstimationError as exc:
        print(f"assumption estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    print(f"scenario: {sc.name}")
    print(_format_certificate(cert))
    return EXIT_OK if cert.certified else EXIT_NOT_CERTIFIED


def _sweep_one(document: dict, gain: float, certify: bool) -> list:
    sc = scenario_from_dict(document).with_overrides(gain=gain)
    try:
        record = simulate(sc)
    except SimulationFault as fault:
        log.warning("gain %g: %s", gain, fault)
        return [sc.name, repr(gain), "", "", "", "nan", "", "", "fault"]
    cert = report = None
    if certify:
        try:
            cert = certify_scenario(sc)
            report = check_proof_bounds(record, cert)
        except EstimationError as exc:
            log.warning("gain %g: %s", gain, exc)
    return sweep_row(summarize(record, cert, report, scenario=sc.name, seed=sc.seed))


def _gains(args) -> list[float]:
    if args.gains:
        try:
            return [float(g) for g in args.gains.split(",") if g.strip()]
        except ValueError:
            raise UsageError(f"cannot parse --gains {args.gains!r}") from None
    lo, hi, steps = args.gain_range
    steps = int(steps)
    if steps < 1 or lo < 0 or hi < lo:
        raise UsageError("--gain-range needs 0 <= LO <= HI and STEPS >= 1")
    return np.linspace(lo, hi, steps).tolist()


def cmd_sweep(args) -> int:
    sc = _load(args)
    gains = _gains(args)
    if any(g < 0 for g in gains):
        raise UsageError("gains must be nonnegative")
    out = Path(args.out) if args.out else _out_dir(argparse.Namespace(out=None), sc.name)
    path = out / "sweep.csv" if out.suffix != ".csv" else out
    doc = sc.document
    if args.workers <= 1:
        for g in gains:
            append_sweep_row(path, _sweep_one(doc, g, not args.no_certify))
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = [pool.submit(_sweep_one, doc, g, not args.no_certify) for g in gains]
            for fut in as_completed(futures):
                append_sweep_row(path, fut.result())
    print(f"{len(gains)} runs appended to {path}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from .reproduce import reproduce_all
    results = reproduce_all()
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return EXIT_OK if passed == len(results) else EXIT_NOT_CERTIFIED


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pinctrl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_args(p, gain=True):
        p.add_argument("scenario", help=f"scenario file or bundled name ({', '.join(bundled_scenarios())})")
        p.add_argument("--dt", type=float)
        p.add_argument("--t-end", type=float)
        if gain:
            p.add_argument("--gain", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name> or runs/<name>)")

    p = sub.add_parser("simulate", help="run a scenario, write CSV, summary and plots")
    scenario_args(p)
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--no-certify", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="evaluate the stability certificate")
    scenario_args(p)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="run a scenario over a grid of gains")
    scenario_args(p, gain=False)
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--gains", help="comma-separated gains")
    grid.add_argument("--gain-range", nargs=3, type=float, metavar=("LO", "HI", "STEPS"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-certify", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="run both bundled experiments and check convergence")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationFault, OSError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_SOFTWARE
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"runtime fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOFTWARE
