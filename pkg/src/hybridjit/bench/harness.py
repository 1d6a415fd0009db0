"""Benchmark protocol: repeated whole-program runs, warm-up discard, mode comparison.

Each iteration is one full execution of the program on a runtime that (by
default) keeps its compiled units between iterations, so the retained samples
measure steady state. Outputs are checked against the reference evaluator
before any timing is reported.
"""

from __future__ import annotations

import csv
import gc
import hashlib
import io
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .. import _deep
from ..base_language import compile_source, parse, reference_run
from ..runtime import DEFAULT_THRESHOLD, MODES, Runtime, StrategyPolicy, parse_strategy
from .corpus import get_program

CSV_COLUMNS = ("program", "mode", "mean_ns", "stddev_ns", "ratio_vs_interp", "guard_fails",
               "compiles", "interpreted_steps", "trace_ops")
COUNTERS = ("guard_fails", "compiles", "interpreted_steps", "trace_ops")


class BenchmarkError(RuntimeError):
    """A benchmark could not produce a trustworthy measurement."""


class OutputMismatch(BenchmarkError):
    """A run printed something other than the reference output."""


@dataclass
class BenchmarkSpec:
    program: str
    source_path: Optional[str] = None
    mode: str = "interp"
    strategy: Optional[str] = None  # strategy file for hybrid mode
    overrides: Optional[Dict[str, str]] = None  # used when no strategy file is given
    iterations: int = 150
    discard: int = 50
    threshold: int = DEFAULT_THRESHOLD
    persist_jit: bool = True
    force_guard: Optional[int] = None
    params: Dict[str, int] = field(default_factory=dict)  # corpus workload overrides

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not 0 <= self.discard < self.iterations:
            raise ValueError(f"discard ({self.discard}) must be in [0, iterations={self.iterations})")
        if self.threshold < 1:
            raise ValueError("threshold must be at least 1")


@dataclass
class BenchmarkResult:
    spec: BenchmarkSpec
    times_ns: List[int]
    output: Tuple[int, ...]
    output_hash: str
    counters: Dict[str, int]  # totals over all iterations
    params: Dict[str, int]
    runtime: Optional[Runtime] = field(default=None, repr=False, compare=False)

    @property
    def retained(self) -> List[int]:
        return self.times_ns[self.spec.discard:]

    @property
    def mean_ns(self) -> float:
        return statistics.fmean(self.retained)

    @property
    def stddev_ns(self) -> float:
        r = self.retained
        return statistics.stdev(r) if len(r) > 1 else 0.0


@dataclass
class LoadedProgram:
    name: str
    source: str
    params: Dict[str, int]
    overrides: Dict[str, str]


def output_hash(output: Sequence[int]) -> str:
    return hashlib.sha256("\n".join(map(str, output)).encode()).hexdigest()[:16]


def load_program(spec: BenchmarkSpec) -> LoadedProgram:
    """Resolve a benchmark request's program to source text, workload sizes and default strategy map."""
    if spec.source_path is not None:
        path = Path(spec.source_path)
        return LoadedProgram(spec.program or path.stem, path.read_text(), {}, {})
    prog = get_program(spec.program)
    if spec.params:
        unknown = set(spec.params) - set(prog.params)
        if unknown:
            raise ValueError(f"{prog.name} has no parameter(s) {', '.join(sorted(unknown))}")
        prog = prog.scaled(**spec.params)
    return LoadedProgram(prog.name, prog.source, dict(prog.params), dict(prog.hybrid))


def _policy(spec: BenchmarkSpec, loaded: LoadedProgram) -> StrategyPolicy:
    if spec.mode != "hybrid":
        return StrategyPolicy(spec.mode)
    if spec.strategy is not None:
        overrides = parse_strategy(Path(spec.strategy).read_text())
    elif spec.overrides is not None:
        overrides = dict(spec.overrides)
    else:
        overrides = loaded.overrides
    return StrategyPolicy("hybrid", overrides)


def run_benchmark(spec: BenchmarkSpec, **runtime_kwargs) -> BenchmarkResult:
    """Run ``spec.iterations`` executions and keep the samples after the warm-up discard."""
    loaded = load_program(spec)
    expected, _ = _reference(loaded.source)
    bytecode = compile_source(loaded.source)
    policy = _policy(spec, loaded)
    policy.check(bytecode)
    rt = Runtime(bytecode, policy, threshold=spec.threshold, persist_jit=spec.persist_jit,
                 force_guard=spec.force_guard, **runtime_kwargs)
    times: List[int] = []
    totals = dict.fromkeys(COUNTERS, 0)
    first: List[Tuple[int, ...]] = []

    def loop():
        for i in range(spec.iterations):
            t0 = time.perf_counter_ns()
            out = rt.run()
            times.append(time.perf_counter_ns() - t0)
            out = tuple(out)
            if out != expected:
                raise OutputMismatch(f"{loaded.name} [{spec.mode}] iteration {i}: printed {list(out)}, "
                                     f"reference printed {list(expected)}")
            if not first:
                first.append(out)
            s = rt.stats
            for k in COUNTERS:
                totals[k] += getattr(s, k)

    was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        _deep.run_deep(loop)
    finally:
        if was_enabled:
            gc.enable()
    return BenchmarkResult(spec, times, first[0], output_hash(first[0]), totals, loaded.params, rt)


def _reference(source: str):
    out, calls = reference_run(parse(source))
    return tuple(out), calls


@dataclass
class ComparisonRow:
    program: str
    mode: str
    mean_ns: float
    stddev_ns: float
    ratio_vs_interp: float  # interp mean / this mean; above 1 is faster
    guard_fails: int
    compiles: int
    interpreted_steps: int
    trace_ops: int


@dataclass
class ComparisonTable:
    program: str
    params: Dict[str, int]
    rows: List[ComparisonRow]
    results: Dict[str, BenchmarkResult] = field(repr=False)

    def row(self, mode: str) -> ComparisonRow:
        for r in self.rows:
            if r.mode == mode:
                return r
        raise KeyError(mode)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.program, r.mode, f"{r.mean_ns:.0f}", f"{r.stddev_ns:.0f}",
                        f"{r.ratio_vs_interp:.4f}", r.guard_fails, r.compiles,
                        r.interpreted_steps, r.trace_ops])
        return buf.getvalue()

    def to_text(self) -> str:
        header = ["mode", "mean ms", "stddev ms", "x interp", "guard_fails", "compiles",
                  "interp_steps", "trace_ops"]
        body = [[r.mode, f"{r.mean_ns / 1e6:.3f}", f"{r.stddev_ns / 1e6:.3f}",
                 f"{r.ratio_vs_interp:.2f}", str(r.guard_fails), str(r.compiles),
                 str(r.interpreted_steps), str(r.trace_ops)] for r in self.rows]
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
        sizes = " ".join(f"{k}={v}" for k, v in self.params.items())
        lines = [f"{self.program}" + (f" ({sizes})" if sizes else "")]
        for row in [header] + body:
            lines.append("  ".join(c.rjust(w) if i else c.ljust(w)
                                   for i, (c, w) in enumerate(zip(row, widths))))
        return "\n".join(lines)


def compare_modes(program: str, modes: Sequence[str] = MODES, **overrides) -> ComparisonTable:
    """Benchmark ``program`` under each mode; ratios are relative to interpreter-only.

    The interpreter-only run is added when not requested, since every ratio
    needs it. ``overrides`` are passed to :class:`BenchmarkSpec`.
    """
    modes = list(dict.fromkeys(modes))
    run_modes = modes if "interp" in modes else ["interp"] + modes
    results = {m: run_benchmark(BenchmarkSpec(program, mode=m, **overrides)) for m in run_modes}
    hashes = {r.output_hash for r in results.values()}
    if len(hashes) != 1:
        raise OutputMismatch(f"{program}: modes disagree on output "
                             f"({', '.join(f'{m}={r.output_hash}' for m, r in results.items())})")
    base = results["interp"].mean_ns
    rows = []
    for m in modes:
        r = results[m]
        ratio = base / r.mean_ns if r.mean_ns else math.inf
        rows.append(ComparisonRow(program, m, r.mean_ns, r.stddev_ns, ratio,
                                  *(r.counters[k] for k in COUNTERS)))
    params = results["interp"].params
    return ComparisonTable(program, params, rows, results)
