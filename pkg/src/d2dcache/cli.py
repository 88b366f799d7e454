"""Command line entry point: ``d2dcache {analytic,simulate,compare}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from .experiments import SimBudget, get_preset, run_compare, run_sweep, write_atomic
from .params import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_COMPARE = 0, 2, 3

log = logging.getLogger("d2dcache")


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="d2dcache", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--preset", required=True, help="fig2, fig3, fig4 or fig5")
        p.add_argument("--config", help="JSON file overriding preset fields")
        p.add_argument("--grid", type=_float_list, help="comma-separated axis values")
        p.add_argument("--out", required=True, help="CSV output path")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")

    def sim_opts(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--requests", type=int, default=100_000, help="measured requests per replication")
        p.add_argument("--reps", type=int, default=10)
        p.add_argument("--warmup", type=int, default=2000, help="warmup requests")
        p.add_argument("--trace", help="per-request trace CSV (one file per sweep point)")

    common(sub.add_parser("analytic", help="evaluate the closed-form model"))
    p = sub.add_parser("simulate", help="run the discrete-event simulator")
    common(p)
    sim_opts(p)
    p = sub.add_parser("compare", help="simulate and check against the closed form")
    common(p)
    sim_opts(p)
    return parser


def _load_spec(args: argparse.Namespace):
    spec = get_preset(args.preset)
    if args.config:
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(overrides, dict):
            raise ConfigError("config must be a JSON object")
        spec = spec.with_overrides(overrides)
    if args.grid is not None:
        spec = spec.with_overrides({"grid": args.grid})
    return spec


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        spec = _load_spec(args)
        start = time.perf_counter()
        if args.command == "analytic":
            result = run_sweep(spec, "analytic", workers=args.workers)
        else:
            budget = SimBudget(args.requests, args.reps, args.warmup)
            if args.command == "simulate":
                result = run_sweep(spec, "simulate", args.seed, budget, args.workers, args.trace)
            else:
                result = run_compare(spec, args.seed, budget, args.workers, args.trace)
    except (ConfigError, ValueError) as exc:
        print(f"d2dcache: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_atomic(args.out, result.to_csv())
    log.info("%d rows in %.2fs -> %s", len(result.points), time.perf_counter() - start, args.out)
    if args.command == "compare" and not result.passed:
        failed = sum(not r.passed for r in result.reports)
        print(f"d2dcache: {failed}/{len(result.reports)} points outside tolerance", file=sys.stderr)
        return EXIT_COMPARE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
