"""Command-line front end: ``dblab analyze | simulate | tradeoff | oracle``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone

from . import bench
from .errors import DBLabError, ResourceLimitError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_ORACLE_MISMATCH = 4


class UsageError(Exception):
    pass


def parse_n(text: str) -> list[int]:
    """Accepts ``8``, ``1..4``, ``1-4`` or ``1,2,8`` (forms can be mixed by commas)."""
    values: list[int] = []
    try:
        for part in filter(None, (p.strip() for p in text.split(","))):
            for sep in ("..", "-"):
                if sep in part:
                    lo, hi = (int(x) for x in part.split(sep, 1))
                    values.extend(range(lo, hi + 1))
                    break
            else:
                values.append(int(part))
    except ValueError:
        raise UsageError(f"cannot parse n range {text!r}") from None
    if not values:
        raise UsageError(f"n range {text!r} is empty")
    return values


def parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


def parse_protocols(text: str, default) -> list[str]:
    if text.lower() == "all":
        return list(default)
    return [p.strip().upper() for p in text.split(",") if p.strip()]


def parse_frauds(text: str) -> list[str]:
    if text.lower() == "all":
        return list(bench.FRAUDS)
    return [f.strip().lower() for f in text.split(",") if f.strip()]


def render(rows: list[dict], columns, fmt: str, timestamp: bool) -> str:
    buf = io.StringIO()
    if fmt == "json":
        for row in rows:
            buf.write(json.dumps({c: row[c] for c in columns}) + "\n")
        return buf.getvalue()
    if timestamp:
        buf.write(f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def emit(args, rows, columns):
    text = render(rows, columns, args.format, not args.no_header_timestamp)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _spec(args) -> bench.SweepSpec:
    return bench.SweepSpec(
        protocols=parse_protocols(args.protocols, bench.ALL_PROTOCOLS),
        frauds=parse_frauds(args.fraud),
        n_values=parse_n(args.n),
        p_d=parse_floats(args.pd),
        trials=args.trials,
        seed=args.seed,
        workers=args.workers,
    )


def cmd_analyze(args) -> int:
    emit(args, bench.analyze(_spec(args)), bench.ANALYZE_COLUMNS)
    return EXIT_OK


def cmd_simulate(args) -> int:
    emit(args, bench.simulate(_spec(args)), bench.SIMULATE_COLUMNS)
    return EXIT_OK


def cmd_tradeoff(args) -> int:
    if args.mafia_targets:
        mafia = parse_floats(args.mafia_targets)
    else:
        mafia = bench.log_grid(args.grid_min, args.grid_max, args.grid_size)
    if args.distance_targets:
        distance = parse_floats(args.distance_targets)
    else:
        distance = bench.log_grid(args.grid_min, args.grid_max, args.grid_size)
    grid = bench.tradeoff(
        mafia, distance, args.n_max,
        protocols=parse_protocols(args.protocols, bench.TRADEOFF_PROTOCOLS),
        p_d=parse_floats(args.pd),
    )
    emit(args, [cell.as_row() for row in grid for cell in row], bench.TRADEOFF_COLUMNS)
    return EXIT_OK


def cmd_oracle(args) -> int:
    rows = bench.oracle_report(args.n_max, parse_floats(args.pd))
    emit(args, rows, bench.ORACLE_COLUMNS)
    failed = [r for r in rows if r["status"] != "pass"]
    for r in failed:
        print(
            f"oracle mismatch: {r['protocol']} {r['fraud']} n={r['n']}: "
            f"oracle {r['oracle']!r} {r['relation']} analytic {r['analytic']!r} fails",
            file=sys.stderr,
        )
    return EXIT_ORACLE_MISMATCH if failed else EXIT_OK


def _add_output(p):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", metavar="FILE")
    p.add_argument("--no-header-timestamp", action="store_true",
                   help="omit the '# generated' line so reruns are byte-identical")


def _add_sweep(p, trials_default):
    p.add_argument("--protocols", default="all", help="comma list of HKP,KAP,ATP,ATP3,GRAPH or 'all'")
    p.add_argument("--fraud", default="all", help="mafia, distance or all")
    p.add_argument("--n", default="8", help="round counts, e.g. 8, 1..4, 1,2,8")
    p.add_argument("--pd", default="0.5", help="KAP predefined-challenge probabilities, comma list")
    p.add_argument("--trials", type=int, default=trials_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dblab", description="Distance-bounding protocol lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="closed-form fraud probabilities")
    _add_sweep(p, 1)
    _add_output(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo fraud estimates")
    _add_sweep(p, 100_000)
    _add_output(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tradeoff", help="fewest-rounds protocol per (mafia, distance) target pair")
    p.add_argument("--protocols", default="all", help="default: GRAPH,HKP,KAP,ATP3")
    p.add_argument("--pd", default="0.5")
    p.add_argument("--n-max", type=int, default=64)
    p.add_argument("--mafia-targets", help="comma list; default is a log-spaced grid")
    p.add_argument("--distance-targets", help="comma list; default is a log-spaced grid")
    p.add_argument("--grid-size", type=int, default=10)
    p.add_argument("--grid-min", type=float, default=1e-10)
    p.add_argument("--grid-max", type=float, default=0.5)
    _add_output(p)
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("oracle", help="exhaustive oracles versus closed forms")
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--pd", default="0.5")
    _add_output(p)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"dblab: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, DBLabError) as exc:
        print(f"dblab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
