"""Command line interface: bench sweeps, scenario runs, table verification."""

from __future__ import annotations

import argparse
import sys

from .harness import BenchConfig, emit_report, run_bench


def _write(data: bytes, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(data.decode())
    else:
        with open(out, "wb") as fh:
            fh.write(data)


def _cmd_bench(args) -> int:
    config = BenchConfig(
        use_case=args.use_case,
        n_bits=args.n_bits,
        count=args.count,
        attribute_count=args.attrs,
        seed=args.seed,
        repeats=args.repeats,
        fmt=args.format,
        out=args.out,
        measure_times=not args.no_times,
    )
    rows = run_bench(config)
    _write(emit_report(rows, config.fmt), args.out)
    return 0


def _cmd_run(args) -> int:
    from .scenario import emit_records, load_scenario, run_scenario

    with open(args.scenario, "r", encoding="utf-8") as fh:
        spec = load_scenario(fh.read())
    world, records = run_scenario(spec)
    _write(emit_records(world, records), args.out)
    return 0 if all(r["ok"] for r in records) else 1


def _cmd_verify_tables(args) -> int:
    from .conformance import communication_checks, computation_checks, render_checks

    counts = (1, 2, 10) if args.quick else (1, 2, 10, 100)
    uploads = (10, 100) if args.quick else (10, 100, 1000, 10000)
    checks = computation_checks(counts=counts)
    checks += communication_checks(upload_counts=uploads)
    text = render_checks(checks) + "\n"
    _write(text.encode(), args.out)
    return 0 if all(c.ok for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sama",
        description="Privacy-preserving aggregation simulator and cost harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run one configuration and report costs")
    bench.add_argument("--use-case", dest="use_case", required=True,
                       choices=["do-do", "drs-do", "drs-dos"])
    bench.add_argument("--n-bits", dest="n_bits", type=int, default=1024,
                       choices=[512, 1024, 2048, 3072, 4096])
    bench.add_argument("--count", type=int, default=10,
                       help="messages (do-do, drs-do) or data owners (drs-dos)")
    bench.add_argument("--attrs", type=int, default=2, help="access-policy width (2..10)")
    bench.add_argument("--seed", type=int, default=1)
    bench.add_argument("--repeats", type=int, default=20)
    bench.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    bench.add_argument("--out", default=None)
    bench.add_argument("--no-times", action="store_true",
                       help="zero the time column (byte-identical reports)")
    bench.set_defaults(fn=_cmd_bench)

    run = sub.add_parser("run", help="execute a scenario file")
    run.add_argument("--scenario", required=True)
    run.add_argument("--out", default=None)
    run.set_defaults(fn=_cmd_run)

    verify = sub.add_parser("verify-tables",
                            help="check counters and link bytes against closed forms")
    verify.add_argument("--out", default=None)
    verify.add_argument("--quick", action="store_true",
                        help="smaller grids (skips the 10k-upload sweep)")
    verify.set_defaults(fn=_cmd_verify_tables)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
