"""Command line entry point: ``ibrf bench`` and ``ibrf synth``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 run failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .dataset import DatasetError, write_csv
from .harness import (
    METHODS,
    DataSource,
    ExperimentConfig,
    emit_report,
    generate_synthetic,
    run_benchmark,
)
from .sampling import SamplerConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUN = 0, 1, 2, 3
SUFFIX_FORMATS = {".md": "markdown", ".markdown": "markdown", ".csv": "csv", ".json": "json"}

logger = logging.getLogger("ibrf")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def worker_count(requested: int | None) -> int:
    """Requested workers (default: all CPUs), capped by ``IBRF_THREADS``."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("IBRF_THREADS")
    if cap:
        try:
            cap_n = int(cap)
        except ValueError:
            raise UsageError(f"IBRF_THREADS must be an integer, got {cap!r}") from None
        if cap_n < 1:
            raise UsageError("IBRF_THREADS must be at least 1")
        n = min(n, cap_n)
    return max(1, n)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ibrf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    bench = sub.add_parser("bench", help="cross-validate methods on datasets")
    bench.add_argument("--data", nargs="+", required=True, metavar="PATH")
    bench.add_argument("--format", choices=("keel", "csv"), default=None,
                       help="input format (default: by suffix, .dat is KEEL)")
    bench.add_argument("--label-col", default="-1",
                       help="CSV label column name or index (default: last)")
    bench.add_argument("--methods", default=",".join(METHODS),
                       help=f"comma-separated subset of {','.join(METHODS)}")
    bench.add_argument("--folds", type=int, default=5)
    bench.add_argument("--trees", type=int, default=100)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--rus-fraction", type=float, default=0.2)
    bench.add_argument("--nc-k", type=int, default=3)
    bench.add_argument("--smote-k", type=int, default=5)
    bench.add_argument("--scale", action="store_true", help="min-max scale on training folds")
    bench.add_argument("--no-mean-rows", action="store_true")
    bench.add_argument("--workers", type=int, default=None)
    bench.add_argument("--out", default=None,
                       help="report path; .md/.csv/.json picks the format (default: stdout)")
    bench.add_argument("--report-format", choices=("markdown", "csv", "json"), default=None)

    synth = sub.add_parser("synth", help="write a synthetic two-Gaussian dataset as CSV")
    synth.add_argument("--minority", type=int, required=True)
    synth.add_argument("--majority", type=int, required=True)
    synth.add_argument("--overlap", type=float, required=True)
    synth.add_argument("--dims", type=int, default=2)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)
    return parser


def _bench(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    fmt = args.report_format
    if fmt is None:
        fmt = SUFFIX_FORMATS.get(Path(args.out).suffix.lower(), "markdown") if args.out else "markdown"
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    try:
        config = ExperimentConfig(
            datasets=tuple(DataSource(p, args.format, args.label_col) for p in args.data),
            methods=methods,
            folds=args.folds,
            seed=args.seed,
            n_trees=args.trees,
            sampler=SamplerConfig(nc_k=args.nc_k, rus_fraction=args.rus_fraction,
                                  smote_k=args.smote_k),
            scale=args.scale,
            output_format=fmt,
            workers=worker_count(args.workers),
            mean_rows=not args.no_mean_rows,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    rows = run_benchmark(config)
    report = emit_report(rows, fmt)
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    else:
        sys.stdout.write(report)

    kinds = {r.error_kind for r in rows if not r.ok}
    if "data" in kinds:
        return EXIT_DATA
    if kinds:
        return EXIT_RUN
    return EXIT_OK


def _synth(args) -> int:
    if args.minority < 1 or args.majority < 1 or args.overlap < 0 or args.dims < 1 or args.seed < 0:
        raise UsageError("counts and dims must be >= 1; overlap and seed must be >= 0")
    data = generate_synthetic(args.minority, args.majority, args.overlap, args.dims, args.seed)
    write_csv(data, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "bench":
            return _bench(args)
        return _synth(args)
    except UsageError as exc:
        print(f"ibrf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetError as exc:
        print(f"ibrf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
