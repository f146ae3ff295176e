import argparse
import json
import logging
import sys
from typing import Dict, List, Optional

from cipkit.config import BENCH_DB_PATH, BENCH_WORKERS, DASHBOARD_PORT
from cipkit.exceptions import BenchError, CipkitError
from cipkit.services.bench_service import build_solver_config

from .app_factory import create_facade, initialize_app

logger = logging.getLogger(__name__)

SOLVER_OPTIONS = (
    ("--cutsel", dict(choices=["hybrid", "dynamic", "ensemble"])),
    ("--branching", dict(choices=["hybrid", "gmi", "mostfrac"])),
    ("--symmetry", dict(choices=["none", "perm", "signed"])),
    ("--symmetry-handling", dict(choices=["none", "sst"])),
    ("--lagromory-freq", dict(type=int)),
    ("--indicator-diving", dict(choices=["on", "off", "auto"])),
    ("--time-limit", dict(type=float)),
    ("--node-limit", dict(type=int)),
)


def _key_values(items: Optional[List[str]], what: str) -> Dict[str, str]:
    values = {}
    for item in items or []:
        if "=" not in item:
            raise BenchError(f"{what} '{item}' must look like KEY=VALUE.")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cipkit", description="Branch-and-cut MILP kernel.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log per-node details.")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Solve one cip or mps instance.")
    solve.add_argument("file")
    for flag, kwargs in SOLVER_OPTIONS:
        solve.add_argument(flag, default=None, **kwargs)
    solve.add_argument("--option", action="append", metavar="KEY=VALUE", help="Any other solver setting.")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--json", action="store_true", help="Print the result as JSON.")

    bench = sub.add_parser("bench", help="Run every instance of a directory with several configs and seeds.")
    bench.add_argument("directory")
    bench.add_argument("--seeds", type=int, default=1, help="Number of seeds, 0..N-1.")
    bench.add_argument("--configs", nargs="+", required=True, help="Configuration files (key = value).")
    bench.add_argument("--out", default="records.jsonl")
    bench.add_argument("--time-limit", type=float, default=None)
    bench.add_argument("--db", default=None, help="Also store records and logs in this SQLite file.")
    bench.add_argument("--workers", type=int, default=BENCH_WORKERS)

    report = sub.add_parser("report", help="Print the bracket table of a bench run.")
    report.add_argument("source", help="JSON-lines records or a bench database.")
    report.add_argument("--baseline", required=True)
    report.add_argument("--json", action="store_true")

    separate = sub.add_parser("separate", help="Separate the signomial terms of an instance at a point.")
    separate.add_argument("file")
    separate.add_argument("--point", nargs="+", required=True, metavar="NAME=VALUE")

    dashboard = sub.add_parser("dashboard", help="Serve the bench dashboard.")
    dashboard.add_argument("--db", default=BENCH_DB_PATH)
    dashboard.add_argument("--baseline", default=None)
    dashboard.add_argument("--port", type=int, default=DASHBOARD_PORT)
    return parser


def _solve(facade, args) -> int:
    options = {flag.lstrip("-"): getattr(args, flag.lstrip("-").replace("-", "_")) for flag, _ in SOLVER_OPTIONS}
    options = {key: value for key, value in options.items() if value is not None}
    options.update(_key_values(args.option, "Option"))
    config = build_solver_config(options)
    problem, result = facade.solve_file(args.file, config, args.seed)
    summary = facade.summarize(problem, result)
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
        return 0
    print(f"status      : {summary['status']}")
    print(f"objective   : {summary['objective']}")
    print(f"dual bound  : {summary['dual_bound']}")
    print(f"nodes       : {summary['nodes']}")
    print(f"time (s)    : {summary['time_s']:.3f}")
    for name, value in summary.get("solution", {}).items():
        if value != 0:
            print(f"  {name} = {value:g}")
    return 0


def _bench(facade, args) -> int:
    if args.seeds < 1:
        raise BenchError("--seeds must be at least 1.")
    records = facade.run_bench(
        args.directory,
        list(range(args.seeds)),
        args.configs,
        out_path=args.out,
        time_limit=args.time_limit,
        store=bool(args.db),
    )
    failed = sum(1 for r in records if r.status in ("parse_error", "error"))
    print(f"{len(records)} records written to {args.out} ({failed} failed).")
    return 0


def _report(facade, args) -> int:
    table = facade.report(args.source, args.baseline)
    if args.json:
        print(json.dumps(table.to_dict(), indent=2))
    else:
        print(table.format())
    return 0


def _separate(facade, args) -> int:
    point = {key: float(value) for key, value in _key_values(args.point, "Point").items()}
    cuts = facade.separate_signomials(args.file, point)
    for cut in cuts:
        terms = " ".join(f"{a:+.6g}*x{j}" for j, a in cut.coeffs)
        print(f"{terms} <= {cut.rhs:.6g}  (efficacy {cut.efficacy:.3g})")
    if not cuts:
        print("Point satisfies every signomial term.")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    db_path = getattr(args, "db", None)
    initialize_app(db_path, args.verbose)
    facade = create_facade(db_path or BENCH_DB_PATH, getattr(args, "workers", BENCH_WORKERS))

    try:
        if args.command == "solve":
            return _solve(facade, args)
        if args.command == "bench":
            return _bench(facade, args)
        if args.command == "report":
            return _report(facade, args)
        if args.command == "separate":
            return _separate(facade, args)
        from dashboard.app import run_dashboard

        logger.info("Starting dashboard...")
        run_dashboard(facade, args.baseline, args.port)
        return 0
    except CipkitError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
