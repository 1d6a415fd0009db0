"""``bench`` command line.

    bench run <program> --mode interp|trace|method|hybrid|all [options]
    bench sweep [programs...] [--out-dir DIR] [--parallel N]
    bench list

``<program>`` is a corpus name or a path to a source file. ``--mode all``
compares every mode and prints ratios against interpreter-only.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

from ..runtime import DEFAULT_THRESHOLD, MODES
from ..trace_backend import render
from .corpus import NAMES, corpus
from .harness import (COUNTERS, CSV_COLUMNS, BenchmarkError, BenchmarkResult, BenchmarkSpec,
                      compare_modes, run_benchmark)


def _params(items: List[str]) -> dict:
    out = {}
    for item in items:
        k, sep, v = item.partition("=")
        if not sep:
            raise ValueError(f"--param expects name=value, got {item!r}")
        out[k.strip()] = int(v)
    return out


def _spec_kwargs(args) -> dict:
    return dict(iterations=args.iterations, discard=args.discard, threshold=args.threshold,
                persist_jit=args.persist_jit, force_guard=args.force_guard_fail,
                params=_params(args.param))


def _target(program: str):
    """(corpus name, source path) for a program argument."""
    if program in NAMES:
        return program, None
    if Path(program).is_file():
        return Path(program).stem, program
    raise ValueError(f"{program!r} is neither a corpus program ({', '.join(NAMES)}) nor a file")


def _print_stats(result: BenchmarkResult, out) -> None:
    spec = result.spec
    rows = [("program", spec.program), ("mode", spec.mode), ("iterations", spec.iterations),
            ("discard", spec.discard), ("retained", len(result.retained)),
            ("threshold", spec.threshold), ("mean_ns", f"{result.mean_ns:.0f}"),
            ("stddev_ns", f"{result.stddev_ns:.0f}")]
    rows += sorted(result.counters.items())
    stats = result.runtime.stats.summary()
    rows += [(f"last_{k}", v) for k, v in stats.items()
             if k not in result.counters]
    rows += [(f"param_{k}", v) for k, v in result.params.items()]
    rows += [("output_hash", result.output_hash), ("output", " ".join(map(str, result.output)))]
    for k, v in rows:
        print(f"{k}={v}", file=out)


def _dump(result: BenchmarkResult, args, out) -> None:
    rt = result.runtime
    for unit in sorted(rt.units(), key=lambda u: (u.strategy, u.key)):
        recorded = rt.recorded.get((unit.strategy, unit.key))
        if args.dump_trace and unit.strategy == "trace" and recorded is not None:
            print(f"# recorded trace {unit.name}", file=out)
            print(render(recorded), file=out)
        if args.dump_method_trace and unit.strategy == "method" and recorded is not None:
            print(f"# method trace {unit.name}", file=out)
            print(render(recorded), file=out)
        if args.dump_ir:
            print(f"# optimized IR {unit.name}", file=out)
            print(render(unit.ir), file=out)
            print(f"# generated code {unit.name}", file=out)
            print(unit.source, file=out)


def cmd_run(args, out=None) -> int:
    out = out or sys.stdout
    name, path = _target(args.program)
    kw = _spec_kwargs(args)
    if args.mode == "all":
        if path is not None:
            raise ValueError("--mode all needs a corpus program")
        table = compare_modes(name, MODES, **kw)
        print(table.to_text(), file=out)
        if args.csv:
            Path(args.csv).write_text(table.to_csv())
        return 0
    spec = BenchmarkSpec(name, source_path=path, mode=args.mode, strategy=args.strategy, **kw)
    result = run_benchmark(spec)
    _print_stats(result, out)
    _dump(result, args, out)
    if args.csv:
        # ratio_vs_interp is left empty: a single mode has no baseline
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            w.writerow([name, args.mode, f"{result.mean_ns:.0f}", f"{result.stddev_ns:.0f}", ""]
                       + [result.counters[k] for k in COUNTERS])
    return 0


def _sweep_one(name: str, kw: dict, out_dir: str) -> str:
    table = compare_modes(name, MODES, **kw)
    Path(out_dir, f"{name}.csv").write_text(table.to_csv())
    return table.to_text()


def cmd_sweep(args, out=None) -> int:
    out = out or sys.stdout
    names = args.programs or list(NAMES)
    for n in names:
        _target(n)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    kw = _spec_kwargs(args)
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            texts = list(pool.map(_sweep_one, names, [kw] * len(names), [args.out_dir] * len(names)))
    else:
        texts = [_sweep_one(n, kw, args.out_dir) for n in names]
    for t in texts:
        print(t, file=out)
        print(file=out)
    return 0


def cmd_list(args, out=None) -> int:
    out = out or sys.stdout
    for p in corpus():
        sizes = " ".join(f"{k}={v}" for k, v in p.params.items())
        print(f"{p.name:<12} {p.group:<9} {sizes:<28} {p.description}", file=out)
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iterations", type=int, default=150, help="runs per mode (default 150)")
    p.add_argument("--discard", type=int, default=50, help="warm-up runs ignored (default 50)")
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD,
                   help=f"hotness threshold (default {DEFAULT_THRESHOLD})")
    p.add_argument("--persist-jit", action=argparse.BooleanOptionalAction, default=True,
                   help="keep compiled units across iterations")
    p.add_argument("--force-guard-fail", type=int, default=None, metavar="N",
                   help="make guard number N fail on every execution")
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="override a corpus workload size (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Benchmark the hybrid JIT runtime.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="benchmark one program")
    run.add_argument("program", help="corpus name or source file")
    run.add_argument("--mode", choices=MODES + ("all",), default="interp")
    run.add_argument("--strategy", metavar="FILE", help="hybrid strategy file (name = trace|method)")
    run.add_argument("--csv", metavar="PATH", help="write the result rows as CSV")
    dumps = run.add_mutually_exclusive_group()
    dumps.add_argument("--dump-trace", action="store_true", help="print recorded trace units")
    dumps.add_argument("--dump-method-trace", action="store_true", help="print recorded method traces")
    dumps.add_argument("--dump-ir", action="store_true",
                       help="print optimized IR and generated code of every unit")
    _common(run)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="compare all modes over corpus programs, one CSV each")
    sweep.add_argument("programs", nargs="*", help="corpus names (default: all)")
    sweep.add_argument("--out-dir", default="bench-results")
    sweep.add_argument("--parallel", type=int, default=1, metavar="N",
                       help="worker processes, one program each (default 1: sequential)")
    _common(sweep)
    sweep.set_defaults(func=cmd_sweep)

    lst = sub.add_parser("list", help="list corpus programs and their workload sizes")
    lst.set_defaults(func=cmd_list)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:  # PolicyError is a ValueError
        parser.error(str(exc))
    except BenchmarkError as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
