"""Command line entry points.

`smoothlab run config.json [...]` validates each configuration, executes
it, and writes a JSON report plus delimited plot data into the output
directory.  `smoothlab plot report.json [...]` re-emits the delimited
data and renders png figures from an existing report.

Exit codes: 0 when every configured check passed, 1 when a check failed
(or, under --strict, when a run raised a computation flag), 2 for
validation or I/O errors, 3 for runtime failures inside a computation.
Validation and runtime errors print a single-line JSON record to stderr
so callers never parse prose.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import ConfigError, error_record, load_config
from .experiments import run_experiment, write_plot_data
from .plots import render_figures
from .reports import read_report

__all__ = ["main", "build_parser", "OUTPUT_ENV"]

# default output directory when --out is not given
OUTPUT_ENV = "SMOOTHLAB_OUT"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothlab",
        description="Numerical laboratory for weighted space-time smoothing "
        "estimates of dispersive propagators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser(
        "run", help="validate and execute experiment configurations"
    )
    run_p.add_argument("configs", nargs="+", metavar="config", help="JSON config file")
    run_p.add_argument(
        "--out",
        default=None,
        help=f"output directory (default: ${OUTPUT_ENV} or the working directory)",
    )
    run_p.add_argument(
        "--seed", type=int, default=None, help="override the configured seed"
    )
    run_p.add_argument(
        "--jobs", type=int, default=1, help="run this many configs in parallel"
    )
    run_p.add_argument(
        "--strict",
        action="store_true",
        help="treat computation flags (non-convergence, ladder instability) as failures",
    )

    plot_p = sub.add_parser(
        "plot", help="emit delimited plot data and figures from existing reports"
    )
    plot_p.add_argument("reports", nargs="+", metavar="report", help="report JSON file")
    plot_p.add_argument(
        "--out",
        default=None,
        help=f"output directory (default: ${OUTPUT_ENV} or next to each report)",
    )
    return parser


def _resolve_out(flag, fallback) -> str:
    if flag:
        return flag
    return os.environ.get(OUTPUT_ENV) or fallback


def _emit_error(record: dict) -> None:
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")


def _run_single(path: str, out_dir: str, seed) -> dict:
    config = load_config(path)
    result = run_experiment(config, out_dir, seed=seed)
    return {
        "config": path,
        "name": result.name,
        "experiment": result.experiment,
        "passed": result.passed,
        "flagged": result.flagged,
        "flags": result.flags,
        "checks": [dict(c) for c in result.checks],
        "report": result.report_path,
    }


def _cmd_run(args) -> int:
    out_dir = _resolve_out(args.out, os.getcwd())
    for path in args.configs:
        if not os.path.exists(path):
            _emit_error({"error": "io", "path": path, "message": "config not found"})
            return 2
    try:
        if args.jobs > 1 and len(args.configs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futures = [
                    pool.submit(_run_single, path, out_dir, args.seed)
                    for path in args.configs
                ]
                outcomes = [f.result() for f in futures]
        else:
            outcomes = [
                _run_single(path, out_dir, args.seed) for path in args.configs
            ]
    except ConfigError as exc:
        _emit_error(error_record(exc))
        return 2
    except (ValueError, RuntimeError) as exc:
        _emit_error({"error": "runtime", "message": str(exc)})
        return 3

    status = 0
    for outcome in outcomes:
        verdict = "pass" if outcome["passed"] else "FAIL"
        notes = ""
        if outcome["flagged"]:
            raised = sorted(k for k, v in outcome["flags"].items() if v)
            notes = f"  [flags: {', '.join(raised)}]"
        print(f"{outcome['name']}: {verdict}  ({outcome['report']}){notes}")
        if not outcome["passed"]:
            status = 1
        if args.strict and outcome["flagged"]:
            status = status or 1
    return status


def _cmd_plot(args) -> int:
    for path in args.reports:
        try:
            payload = read_report(path)
        except OSError as exc:
            _emit_error({"error": "io", "path": path, "message": str(exc)})
            return 2
        except json.JSONDecodeError as exc:
            _emit_error({"error": "io", "path": path, "message": f"invalid JSON: {exc}"})
            return 2
        out_dir = _resolve_out(args.out, os.path.dirname(os.path.abspath(path)))
        base = payload.get("name") or os.path.splitext(os.path.basename(path))[0]
        written = write_plot_data(payload, out_dir, base)
        written += render_figures(payload, out_dir, base)
        for item in written:
            print(item)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_plot(args)


if __name__ == "__main__":
    sys.exit(main())
