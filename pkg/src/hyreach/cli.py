"""Command-line entry point.

Exit codes: 0 success, 1 unexpected error, 2 scenario/schema error,
3 infeasibility (empty tube branch or MPC solver failure),
4 Monte Carlo containment failure.  ``HYREACH_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import export, runs
from .scenario import ScenarioError, parse_scenario
from .setalg import EmptySetError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_CONTAINMENT = 4

log = logging.getLogger("hyreach")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyreach", description="Reachable tubes, heating limits and tube MPC for re-entry.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reach", help="compute a reachable tube")
    r.add_argument("scenario")
    r.add_argument("--constrained", action="store_true", help="intersect each step with the heat-rate halfspace")
    r.add_argument("--out", default=None, help="output directory (default: scenario output_dir)")
    r.add_argument("--no-validate", action="store_true", help="skip the Monte Carlo audit")

    m = sub.add_parser("mpc", help="closed-loop tracking inside the tube")
    m.add_argument("scenario")
    m.add_argument("--no-tube-constraint", action="store_true")
    m.add_argument("--out", default=None)

    v = sub.add_parser("validate", help="Monte Carlo containment audit of a stored tube")
    v.add_argument("tube")
    v.add_argument("scenario")
    v.add_argument("--samples", type=int, default=None)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--out", default=None)

    h = sub.add_parser("heat", help="heat-rate analysis against the limit curve")
    h.add_argument("scenario")
    h.add_argument("--out", default=None)
    return p


def _configure_logging():
    level = os.environ.get("HYREACH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _summary(report) -> str:
    c = report.containment
    parts = [f"{report.kind} {report.scenario}"]
    if c.get("checked"):
        parts.append(f"containment {c['samples'] - len(c.get('violating_samples', []))}/{c['samples']} "
                     f"(violations {c['violations']})")
    if report.tracking:
        parts.append(f"tube contained {report.tracking['tube_contained']}/{report.tracking['tube_checked']}")
    peak = report.heat.get("max_rate", report.heat.get("nominal_peak_rate"))
    if peak is not None:
        parts.append(f"peak heat {peak:.4g} W/m^2 (limit {report.heat['limit']:.4g})")
    return ", ".join(parts)


def main(argv=None) -> int:
    _configure_logging()
    args = _parser().parse_args(argv)
    try:
        cfg = parse_scenario(args.scenario)
        if args.command == "reach":
            report, _ = runs.run_reach(cfg, args.constrained, args.out, validate=False if args.no_validate else None)
            code = EXIT_INFEASIBLE if report.warnings and any("emptied" in w for w in report.warnings) else EXIT_OK
        elif args.command == "mpc":
            report, lg, _ = runs.run_mpc(cfg, args.out, tube_constraint=not args.no_tube_constraint)
            code = EXIT_INFEASIBLE if lg.held.any() else EXIT_OK
        elif args.command == "validate":
            tube = export.read_tube_json(args.tube)
            report, _ = runs.run_validate(cfg, tube, args.samples, args.seed, args.out)
            code = EXIT_OK
        else:
            report, _ = runs.run_heat_analysis(cfg, args.out)
            code = EXIT_OK
    except (ScenarioError, export.ExportSchemaError) as e:
        print(f"hyreach: schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as e:
        print(f"hyreach: file not found: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except EmptySetError as e:
        print(f"hyreach: infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as e:  # noqa: BLE001 - report and map to the generic code
        log.debug("unhandled error", exc_info=True)
        print(f"hyreach: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    if report.containment.get("checked") and report.containment["violations"] > 0:
        code = EXIT_CONTAINMENT
    print(_summary(report))
    for w in report.warnings:
        print(f"warning: {w}")
    return code


if __name__ == "__main__":
    sys.exit(main())
