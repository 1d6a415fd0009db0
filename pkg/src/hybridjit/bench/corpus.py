"""Built-in benchmark programs.

Every program is a template whose numeric workload parameters are filled in
from ``params``. The defaults are sized for quick runs; ``full_params``
records the larger reference sizes of the four mixed programs, and
``full_source`` renders them. The base language has no arrays, so the array-flavoured programs
(ary, prefix_sum, sieve) compute their elements from the index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional

from ..base_language import compile_source, parse, reference_run


@dataclass(frozen=True)
class CorpusProgram:
    name: str
    template: str
    params: Dict[str, int]
    group: str  # "straight" | "divergent" | "mixed"
    full_params: Optional[Dict[str, int]] = None
    hybrid: Dict[str, str] = field(default_factory=dict)
    description: str = ""

    @property
    def source(self) -> str:
        return self.template.format(**self.params)

    @property
    def full_source(self) -> Optional[str]:
        return self.template.format(**self.full_params) if self.full_params else None

    def scaled(self, **params: int) -> "CorpusProgram":
        merged = dict(self.params)
        merged.update(params)
        return CorpusProgram(self.name, self.template, merged, self.group, self.full_params,
                             self.hybrid, self.description)

    def bytecode(self):
        return _compile(self.source)

    def reference(self):
        """(printed output, base-level call count) from the reference evaluator."""
        return _reference(self.source)


@lru_cache(maxsize=None)
def _compile(source: str):
    return compile_source(source)


@lru_cache(maxsize=None)
def _reference(source: str):
    out, calls = reference_run(parse(source))
    return tuple(out), calls


_PROGRAMS: List[CorpusProgram] = [
    CorpusProgram(
        "fib-tail",
        "let rec fib a b n = if n <= 1 then a else fib b (a + b) (n - 1) in "
        "let rec loop i acc = if i <= 0 then acc else loop (i - 1) (acc + fib 1 1 {n}) in "
        "print_int (loop {reps} 0)",
        {"n": 60, "reps": 40}, "straight",
        description="tail-recursive Fibonacci repeated by a tail-recursive driver"),
    CorpusProgram(
        "sum",
        "let rec sum n = if n <= 0 then 0 else n + sum (n - 1) in print_int (sum {n})",
        {"n": 2500}, "straight", description="non-tail recursive sum 1..n"),
    CorpusProgram(
        "sum-tail",
        "let rec sum acc n = if n <= 0 then acc else sum (acc + n) (n - 1) in print_int (sum 0 {n})",
        {"n": 2500}, "straight", description="accumulator sum 1..n"),
    CorpusProgram(
        "square",
        "let rec square n = if n <= 0 then 0 else n * n + square (n - 1) in print_int (square {n})",
        {"n": 2500}, "straight", description="non-tail recursive sum of squares"),
    CorpusProgram(
        "square-tail",
        "let rec square acc n = if n <= 0 then acc else square (acc + n * n) (n - 1) in "
        "print_int (square 0 {n})",
        {"n": 2500}, "straight", description="accumulator sum of squares"),
    CorpusProgram(
        "fact",
        "let rec fact n = if n <= 1 then 1 else n * fact (n - 1) in "
        "let rec loop i acc = if i <= 0 then acc else loop (i - 1) (acc + fact {n}) in "
        "print_int (loop {reps} 0)",
        {"n": 17, "reps": 120}, "straight", description="factorial repeated by a driver loop"),
    CorpusProgram(
        "ary",
        "let rec get i = i * 3 + 1 in "
        "let rec ary i n acc = if n <= i then acc else ary (i + 1) n (acc + get i) in "
        "print_int (ary 0 {n} 0)",
        {"n": 2000}, "straight", description="sum over an index-computed array"),
    CorpusProgram(
        "prefix_sum",
        "let rec elem i = i * i - i in "
        "let rec prefix i n run total = if n <= i then total else "
        "let run2 = run + elem i in prefix (i + 1) n run2 (total + run2) in "
        "print_int (prefix 0 {n} 0 0)",
        {"n": 2000}, "straight", description="sum of the running prefix sums of an index-computed array"),
    CorpusProgram(
        "fib",
        "let rec fib n = if n <= 1 then 1 else fib (n - 1) + fib (n - 2) in print_int (fib {n})",
        {"n": 17}, "divergent", description="doubly recursive Fibonacci"),
    CorpusProgram(
        "ack",
        "let rec ack m n = if m = 0 then n + 1 else if n = 0 then ack (m - 1) 1 "
        "else ack (m - 1) (ack m (n - 1)) in print_int (ack 2 {n})",
        {"n": 60}, "divergent", description="Ackermann function"),
    CorpusProgram(
        "tak",
        "let rec tak x y z = if x <= y then z else "
        "tak (tak (x - 1) y z) (tak (y - 1) z x) (tak (z - 1) x y) in print_int (tak {x} {y} {z})",
        {"x": 12, "y": 6, "z": 4}, "divergent", description="Takeuchi function"),
    CorpusProgram(
        "sieve",
        "let rec next3 c = if c = 2 then 0 else c + 1 in "
        "let rec next5 c = if c = 4 then 0 else c + 1 in "
        "let rec sieve i n c2 c3 c5 acc = if n < i then acc "
        "else if c2 * c3 * c5 = 0 then sieve (i + 1) n (1 - c2) (next3 c3) (next5 c5) acc "
        "else sieve (i + 1) n (1 - c2) (next3 c3) (next5 c5) (acc + 1) in "
        "print_int (sieve 1 {n} 1 1 1 0)",
        {"n": 1500}, "divergent",
        description="wheel sieve counting integers in 1..n with no factor 2, 3 or 5"),
    CorpusProgram(
        "sum-fib",
        "let rec fib n = if n <= 1 then 1 else fib (n-1) + fib (n-2) in "
        "let rec sum i n = if i <= 1 then n else let m = fib {fib} in sum (i-1) (n+m) in "
        "print_int (sum {sum} 0)",
        {"fib": 12, "sum": 30}, "mixed", {"fib": 10, "sum": 1000},
        {"sum": "trace", "fib": "method"}, "driver loop calling doubly recursive Fibonacci"),
    CorpusProgram(
        "fib-sum",
        "let rec sum acc n = if n <= 1 then acc else sum (acc+n) (n-1) in "
        "let rec fib n = if n <= 2 then sum 0 {sum} else fib (n-1) + fib (n-2) in "
        "print_int (fib {fib})",
        {"sum": 1000, "fib": 8}, "mixed", {"sum": 1000, "fib": 20},
        {"sum": "trace", "fib": "method"}, "Fibonacci whose leaves run an accumulator loop"),
    CorpusProgram(
        "sum-tak",
        "let rec tak x y z = if x <= y then z else tak (tak (x-1) y z) (tak (y-1) z x) (tak (z-1) x y) in "
        "let rec sum i n = if i <= 1 then n else let m = tak {x} {y} {z} in sum (i-1) (n + m) in "
        "print_int (sum {sum} 0)",
        {"x": 13, "y": 6, "z": 4, "sum": 30}, "mixed", {"x": 12, "y": 6, "z": 4, "sum": 100},
        {"sum": "trace", "tak": "method"}, "driver loop calling the Takeuchi function"),
    CorpusProgram(
        "tak-sum",
        "let rec sum i n = if i <= 1 then n else sum (i-1) (n+i) in "
        "let rec tak x y z = if x <= y then sum {sum} 0 else "
        "tak (tak (x-1) y z) (tak (y-1) z x) (tak (z-1) x y) in print_int (tak {x} {y} {z})",
        {"sum": 1000, "x": 8, "y": 4, "z": 2}, "mixed", {"sum": 1000, "x": 8, "y": 4, "z": 2},
        {"sum": "trace", "tak": "method"}, "Takeuchi function whose leaves run an accumulator loop"),
]

NAMES = tuple(p.name for p in _PROGRAMS)
STRAIGHT = tuple(p.name for p in _PROGRAMS if p.group == "straight")
DIVERGENT = tuple(p.name for p in _PROGRAMS if p.group == "divergent")
MIXED = tuple(p.name for p in _PROGRAMS if p.group == "mixed")


def corpus() -> List[CorpusProgram]:
    return list(_PROGRAMS)


def get_program(name: str) -> CorpusProgram:
    for p in _PROGRAMS:
        if p.name == name:
            return p
    raise KeyError(f"unknown corpus program {name!r}; known: {', '.join(NAMES)}")
