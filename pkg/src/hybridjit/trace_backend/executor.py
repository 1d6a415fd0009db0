"""Compiled units, their execution, and the unit registry."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .codegen import compile_ir
from .fold import fold_constants
from .ir import DeoptSnapshot, Reg, TraceIR, number_guards, verify
from .optimize import optimize as optimize_ir


@dataclass
class GuardFail:
    gid: int
    snapshot: DeoptSnapshot
    values: Dict[Reg, object]


@dataclass
class Returned:
    value: object


@dataclass
class JumpOut:
    """Control left the unit for interpreter state (pc, sp, fp)."""

    pc: int
    sp: int
    fp: int


@dataclass(eq=False)
class CompiledUnit:
    strategy: str  # "trace" | "method"
    key: int
    ir: TraceIR
    fn: Callable
    source: str
    deopt: Dict[int, DeoptSnapshot] = field(default_factory=dict)
    entries: int = 0

    @property
    def name(self) -> str:
        return f"{self.strategy}:{self.ir.name or ''}@{self.key}"


def build_unit(ir: TraceIR, *, call=None, callout=None, output=None, counters=None,
               force_guard: Optional[int] = None, instrument: bool = False,
               fold: bool = True, optimize: bool = True,
               forward_memory: bool = True, facts=None) -> CompiledUnit:
    """Fold, optimize, verify and translate ``ir`` into an executable unit."""
    if fold:
        ir = fold_constants(ir)
    if optimize:
        ir = optimize_ir(ir, forward_memory=forward_memory, facts=facts)
    verify(ir)
    fn, src = compile_ir(ir, call=call, callout=callout, output=output, counters=counters,
                         force_guard=force_guard, instrument=instrument)
    deopt = {g.gid: g.snapshot for g in ir.guards()}
    return CompiledUnit(ir.kind, ir.key, ir, fn, src, deopt)


def decode_exit(unit: CompiledUnit, result):
    """Turn a unit's raw return value into an exit reason."""
    if unit.strategy == "trace":
        gid = result[0]
        snap = unit.deopt[gid]
        return GuardFail(gid, snap, dict(zip(snap.registers(), result[1:])))
    if result.__class__ is tuple:
        return JumpOut(*result)
    return Returned(result)


def execute_unit(unit: CompiledUnit, stack, sp: int, fp: int):
    """Run ``unit`` from state (sp, fp); returns GuardFail, Returned or JumpOut."""
    unit.entries += 1
    return decode_exit(unit, unit.fn(stack, sp, fp))


class Registry:
    """Compiled units keyed by (strategy, entry pc)."""

    def __init__(self):
        self._units: Dict[Tuple[str, int], CompiledUnit] = {}
        self._lock = threading.Lock()
        self.lookups = 0

    def insert(self, unit: CompiledUnit) -> None:
        with self._lock:
            self._units[(unit.strategy, unit.key)] = unit

    def lookup(self, strategy: str, key: int) -> Optional[CompiledUnit]:
        self.lookups += 1
        return self._units.get((strategy, key))

    def link(self, unit: CompiledUnit, key: int, strategy: Optional[str] = None) -> Optional[CompiledUnit]:
        """Resolve an exit of ``unit`` to ``key``: the unit itself for its own loop, else a registered unit.

        A missing target returns None, meaning the exit resumes in the interpreter.
        """
        if key == unit.key and (strategy or unit.strategy) == unit.strategy:
            return unit
        return self._units.get((strategy or unit.strategy, key))

    def units(self) -> List[CompiledUnit]:
        return list(self._units.values())

    def __contains__(self, item) -> bool:
        return item in self._units

    def __len__(self) -> int:
        return len(self._units)
