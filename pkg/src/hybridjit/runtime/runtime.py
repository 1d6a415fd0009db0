"""Mixed-mode execution: interpreter, trace units and method units sharing one user stack.

The interpreter runs with hooks attached. Backward pc transfers in
trace-strategy regions tick a per-key counter; the merge point of a key whose
counter reached the threshold starts meta-tracing there. Arriving at the entry
of a method-strategy function ticks that function's counter and, once hot,
compiles and enters its method unit. Units hand control back through three
doors: a failing guard (trace units, resumed in the interpreter from the
guard's snapshot), a plain return (method units called on the host stack) or
an exit state (method units leaving through the user-stack return protocol).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .. import _deep
from ..base_language.bytecode import BytecodeProgram, Op
from ..host_ir.interpreter import build_interpreter
from ..host_ir.ir import Flag, HostProgram, RetAddr
from ..host_ir.machine import (DEFAULT_HOST_DEPTH, DEFAULT_STACK_CAPACITY, Counters, HostError,
                               HostFailure, HostRecursionLimit, HostReturn, Hooks, Machine,
                               UserStackOverflow)
from ..method_engine.method import DEFAULT_MAX_IFS, jit_meta_method
from ..trace_backend.executor import CompiledUnit, Registry, build_unit
from ..trace_backend.ir import Reg, TraceIR
from ..tracing_engine.core import Frame, TraceAbort
from ..tracing_engine.meta import (DEFAULT_MAX_MERGES, DEFAULT_MAX_OPS, ExecutionContext,
                                   MetaTracer, resume_frames)
from .policy import MAIN, StrategyPolicy

DEFAULT_THRESHOLD = 100
BLACKLIST_AFTER = 2


class DeoptError(HostError):
    """A guard snapshot could not be turned back into a valid interpreter state."""


class FlagImbalance(HostError):
    pass


@dataclass
class CompileRequest:
    key: int
    strategy: str
    ticks: int


@dataclass
class Stats:
    interpreted_steps: int = 0
    trace_entries: int = 0
    method_entries: int = 0
    trace_iterations: int = 0
    trace_ops: int = 0  # estimate: whole iterations times body length plus the prefix to the failing guard
    guard_fails: int = 0
    compiles: int = 0
    trace_compiles: int = 0
    method_compiles: int = 0
    aborts: int = 0
    blacklisted: int = 0
    fallbacks: int = 0
    callouts: int = 0
    bridge_calls: int = 0
    encounters: Dict[Tuple[str, int], int] = field(default_factory=dict)
    first_entry: Dict[Tuple[str, int], int] = field(default_factory=dict)
    abort_reasons: List[str] = field(default_factory=list)

    @property
    def unit_entries(self) -> int:
        return self.trace_entries + self.method_entries

    def summary(self) -> Dict[str, int]:
        return {k: v for k, v in vars(self).items() if isinstance(v, int)}


class _Context(ExecutionContext):
    def __init__(self, rt: "Runtime", counters):
        super().__init__(rt.stack, rt.output, counters)
        self.rt = rt

    def hs_call(self, entry, stack, sp, fp):
        return self.rt.bridge_call(entry, stack, sp, fp)

    def callout(self, entry, stack, sp, fp):
        return self.rt.callout(entry, stack, sp, fp)


class Runtime(Hooks):
    """One program under one strategy policy; ``run`` may be called repeatedly."""

    def __init__(self, bytecode: BytecodeProgram, policy: Optional[StrategyPolicy] = None, *,
                 program: Optional[HostProgram] = None, threshold: int = DEFAULT_THRESHOLD,
                 instrument: bool = False, force_guard: Optional[int] = None,
                 persist_jit: bool = True, max_trace_ops: int = DEFAULT_MAX_OPS,
                 max_trace_merges: int = DEFAULT_MAX_MERGES, max_ifs: int = DEFAULT_MAX_IFS,
                 stack_capacity: int = DEFAULT_STACK_CAPACITY,
                 max_host_depth: int = DEFAULT_HOST_DEPTH, fold: bool = True,
                 optimize: bool = True):
        super().__init__()
        if threshold < 1:
            raise ValueError("threshold must be at least 1")
        self.bytecode = bytecode
        self.policy = policy or StrategyPolicy("interp")
        self.policy.check(bytecode)
        self.program = program or build_interpreter()
        self.threshold = threshold
        self.instrument = instrument
        self.force_guard = force_guard
        self.persist_jit = persist_jit
        self.max_trace_ops = max_trace_ops
        self.max_trace_merges = max_trace_merges
        self.max_ifs = max_ifs
        self.max_host_depth = max_host_depth
        self.fold = fold
        self.optimize = optimize
        self.counters = Counters()
        self.stack: list = [0] * stack_capacity
        self.output: List[int] = []
        self.ctx = _Context(self, self.counters if instrument else None)
        hooked = self.policy.mode != "interp"
        self.machine = Machine(self.program, bytecode, is_mj=False, hooks=self if hooked else None,
                               max_host_depth=max_host_depth, instrument=instrument, count_steps=True,
                               counters=self.counters, stack=self.stack, output=self.output)
        self._reset_jit()

    def _reset_jit(self) -> None:
        n = len(self.bytecode.instructions)
        self._strategy_at: List[Optional[str]] = [None] * n
        self._region_name: List[str] = [MAIN] * n
        for name, start, end in self.bytecode.regions():
            strat = self.policy.strategy_for(name)
            for pc in range(start, end):
                self._strategy_at[pc] = strat
                self._region_name[pc] = name
        self.registry = Registry()
        self.stats = Stats()
        self.method_entries: Dict[int, str] = {}
        for f in self.bytecode.functions:
            if self._strategy_at[f.entry] == "method":
                self.method_entries[f.entry] = f.name
        self._method_units: Dict[int, CompiledUnit] = {}
        self.recorded: Dict[Tuple[str, int], TraceIR] = {}  # unit IR before fold/optimize
        self._trace_units: Dict[int, CompiledUnit] = {}
        self._ticks: Counter = Counter()
        self._next_request: Dict[Tuple[str, int], int] = {}
        self._aborts: Counter = Counter()
        self.blacklist: Set[int] = set()
        self.pending: Set[int] = set()
        self._fallen_back: Set[str] = set()
        self._stops: List[Tuple[int, int]] = []
        self._hs_depth = 0
        self.watch.clear()
        self.watch.update(self.method_entries)

    # profiling

    def profile_tick(self, key: int, strategy: str) -> Optional[CompileRequest]:
        """Count one encounter of ``key``; a request is returned when it becomes hot."""
        k = (strategy, key)
        n = self._ticks[k] + 1
        self._ticks[k] = n
        self.stats.encounters[k] = n
        if n >= self._next_request.get(k, self.threshold):
            if strategy == "trace" and (key in self.blacklist or key in self._trace_units):
                return None
            if strategy == "method" and key in self._method_units:
                return None
            self._next_request[k] = n + self.threshold
            return CompileRequest(key, strategy, n)
        return None

    def on_can_enter(self, pc, stack, sp, fp):
        if self._strategy_at[pc] != "trace" or pc in self._trace_units or pc in self.pending:
            return
        req = self.profile_tick(pc, "trace")
        if req is not None:
            self.pending.add(pc)
            self.watch.add(pc)

    # dispatch into units

    def on_merge(self, pc, stack, sp, fp, depth):
        moved = False
        while True:
            if self._stops:
                callee_fp, ret_pc = self._stops[-1]
                if pc == ret_pc and fp < callee_fp:
                    return HostReturn(("callout", pc, sp, fp))
            if pc in self.method_entries:
                unit = self._method_units.get(pc)
                if unit is None:
                    req = self.profile_tick(pc, "method")
                    if req is not None:
                        unit = self._compile_method(pc)
                if unit is not None:
                    res = self._enter_method(unit, stack, sp, fp)
                    if res.__class__ is tuple:
                        pc, sp, fp = res
                        moved = True
                        continue
                    return HostReturn(res)
                if pc in self.method_entries:
                    break
            unit = self._trace_units.get(pc)
            if unit is not None:
                res = self._enter_trace(unit, sp, fp)
            elif pc in self.pending:
                self.pending.discard(pc)
                res = self._trace(pc, sp, fp)
            else:
                break
            if res[0] == "return":
                return HostReturn(res[1])
            _, pc, sp, fp = res
            moved = True
        return (pc, sp, fp) if moved else None

    def _mark_entry(self, unit: CompiledUnit) -> None:
        k = (unit.strategy, unit.key)
        if k not in self.stats.first_entry:
            self.stats.first_entry[k] = self._ticks[k]

    def _enter_method(self, unit: CompiledUnit, stack, sp, fp):
        self.stats.method_entries += 1
        self._mark_entry(unit)
        return unit.fn(stack, sp, fp)

    def _enter_trace(self, unit: CompiledUnit, sp, fp) -> tuple:
        self.stats.trace_entries += 1
        self._mark_entry(unit)
        ctr = self.counters
        before = ctr.trace_iters
        res = unit.fn(self.stack, sp, fp)
        iters = ctr.trace_iters - before
        gid = res[0]
        self.stats.guard_fails += 1
        self.stats.trace_iterations += iters
        self.stats.trace_ops += (iters - 1) * unit.body_len + unit.guard_pos.get(gid, 0)
        snap = unit.deopt[gid]
        values = dict(zip(snap.registers(), res[1:]))
        return self.resume_from_snapshot(snap, values)

    def resume_from_snapshot(self, snap, values: Dict[Reg, object]) -> tuple:
        """Rebuild the host frames of a deopt snapshot and interpret to the next merge point."""
        frames = []
        for fs in snap.frames:
            fn = self.program.functions.get(fs.function)
            if fn is None or fs.block not in fn.blocks:
                raise DeoptError(f"snapshot names unknown host position {fs.function}.{fs.block}")
            env = {}
            for var, v in fs.env:
                if isinstance(v, Reg):
                    if v not in values:
                        raise DeoptError(f"snapshot register {v} has no value")
                    env[var] = values[v]
                else:
                    env[var] = v.value
            frames.append(Frame(fn, fs.block, fs.index, env, fs.ret_dst))
        top = frames[0].env
        cap = len(self.stack)
        for cell in ("sp", "fp"):
            v = top.get(cell)
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= cap:
                raise DeoptError(f"snapshot {cell}={v!r} outside the user stack [0, {cap}]")
        return resume_frames(self.program, self.bytecode, self.ctx, frames)

    # compilation

    def _trace(self, key: int, sp, fp) -> tuple:
        tracer = MetaTracer(self.program, self.bytecode, self.ctx, key, max_ops=self.max_trace_ops,
                            max_merges=self.max_trace_merges,
                            callout_entries=frozenset(self.method_entries),
                            foreign=frozenset(pc for pc, s in enumerate(self._strategy_at)
                                              if s == "method"),
                            name=self._region_name[key])
        out = tracer.trace(sp, fp)
        if out.ir is not None:
            unit = self._build(out.ir, self._entry_facts(out.ir, key))
            self.registry.insert(unit)
            self._trace_units[key] = unit
            self.stats.compiles += 1
            self.stats.trace_compiles += 1
            self.watch.add(key)
        else:
            self._aborted(key, out.abort)
        return out.resume

    def _aborted(self, key: int, exc: TraceAbort) -> None:
        self.stats.aborts += 1
        self.stats.abort_reasons.append(f"trace@{key}: {exc}")
        self._aborts[key] += 1
        if self._aborts[key] >= BLACKLIST_AFTER:
            self.blacklist.add(key)
            self.stats.blacklisted += 1
        self._refresh_watch(key)

    def _compile_method(self, entry: int) -> Optional[CompiledUnit]:
        try:
            ir = jit_meta_method(self.program, self.bytecode, entry, max_ifs=self.max_ifs,
                                 max_ops=self.max_trace_ops)
        except TraceAbort as exc:
            # the function falls back to the trace strategy
            name = self.method_entries.pop(entry)
            self.stats.aborts += 1
            self.stats.fallbacks += 1
            self.stats.abort_reasons.append(f"method {name}: {exc}")
            self._fallen_back.add(name)
            for n, start, end in self.bytecode.regions():
                if n == name:
                    for pc in range(start, end):
                        self._strategy_at[pc] = "trace"
            self._refresh_watch(entry)
            return None
        unit = self._build(ir, self._entry_facts(ir, entry))
        self.registry.insert(unit)
        self._method_units[entry] = unit
        self.stats.compiles += 1
        self.stats.method_compiles += 1
        return unit

    def _entry_facts(self, ir, entry: int):
        """At a function entry reached only through CALL, sp = fp + arity."""
        info = self.bytecode.function_at(entry)
        if info is None:
            return None
        for ins in self.bytecode.instructions:
            if ins.op in (Op.JUMP, Op.JUMP_IF) and ins.a == entry:
                return None
        return {ir.inputs[0]: (ir.inputs[1], info.arity)}

    def _build(self, ir, facts=None) -> CompiledUnit:
        self.recorded[(ir.kind, ir.key)] = ir
        unit = build_unit(ir, call=self.bridge_call, callout=self.callout, output=self.output,
                          counters=self.counters, force_guard=self.force_guard,
                          instrument=self.instrument, fold=self.fold, optimize=self.optimize,
                          forward_memory=not self.instrument, facts=facts)
        unit.body_len = len(unit.ir.body)
        unit.guard_pos = {op.gid: i + 1 for i, op in enumerate(unit.ir.body)
                          if getattr(op, "gid", None) is not None}
        return unit

    def _refresh_watch(self, pc: int) -> None:
        needed = (pc in self.method_entries or pc in self._trace_units or pc in self.pending
                  or any(s[1] == pc for s in self._stops))
        if needed:
            self.watch.add(pc)
        else:
            self.watch.discard(pc)

    # bridges between the two stacks

    def bridge_call(self, entry: int, stack, sp: int, fp: int):
        """A base-language call made on the host stack (method unit call sites)."""
        self._hs_depth += 1
        if self._hs_depth > self.max_host_depth:
            self._hs_depth -= 1
            raise HostRecursionLimit(f"host-stack recursion exceeded {self.max_host_depth} activations")
        try:
            unit = self._method_units.get(entry)
            if unit is not None:
                self.stats.method_entries += 1
                res = unit.fn(stack, sp, fp)
            else:
                self.stats.bridge_calls += 1
                res = self.machine.dispatch(entry, stack, sp, fp, self._hs_depth)
        finally:
            self._hs_depth -= 1
        if res.__class__ is tuple:
            raise HostFailure(f"host-stack call to {entry} left through the user-stack protocol")
        return res

    def callout(self, entry: int, stack, sp: int, fp: int) -> Tuple[int, int, int]:
        """Run a method-strategy function entered from a trace; returns the state after its return."""
        self.stats.callouts += 1
        unit = self._method_units.get(entry)
        if unit is not None:
            res = self._enter_method(unit, stack, sp, fp)
            if res.__class__ is not tuple:
                raise HostFailure(f"callout to {entry} returned on the host stack")
            return res
        ra = stack[fp - 2]
        if not isinstance(ra, RetAddr):
            raise HostFailure(f"callout to {entry} without a return address at fp-2")
        self._stops.append((fp, ra.pc))
        self.watch.add(ra.pc)
        try:
            res = self.machine.dispatch(entry, stack, sp, fp, self._hs_depth + 1)
        finally:
            self._stops.pop()
            self._refresh_watch(ra.pc)
        if res.__class__ is not tuple or res[0] != "callout":
            raise HostFailure(f"callout to {entry} did not return to pc {ra.pc}")
        return res[1:]

    # running

    def run(self) -> List[int]:
        """Execute the program once; returns the printed integers."""
        if not self.persist_jit:
            self._reset_jit()
        else:
            self.watch.update(self._trace_units)
            self.stats = Stats(encounters=self.stats.encounters, first_entry=self.stats.first_entry)
        self.output.clear()
        c = self.counters
        steps0 = c.steps
        c.flag_pushes = c.flag_reads = 0
        c.last_sp = None
        self.pending.clear()
        self._stops.clear()
        self._hs_depth = 0
        try:
            self.machine.run()
        finally:
            self.stats.interpreted_steps += c.steps - steps0
        return list(self.output)

    def flag_balance(self) -> Tuple[int, int, int]:
        """(pushes, reads, flags left below the final sp) for the last instrumented run."""
        sp = self.counters.last_sp or 0
        left = sum(1 for v in self.stack[:sp] if v.__class__ is Flag)
        return self.counters.flag_pushes, self.counters.flag_reads, left

    def check_flag_balance(self) -> None:
        if not self.instrument:
            raise ValueError("flag balance needs an instrumented runtime")
        pushes, reads, left = self.flag_balance()
        if pushes != reads or left:
            raise FlagImbalance(f"{pushes} flag pushes, {reads} reads, {left} left on the stack")

    def units(self) -> List[CompiledUnit]:
        return self.registry.units()


def run_program(bytecode: BytecodeProgram, mode: str = "interp", overrides=None, **kwargs) -> List[int]:
    return Runtime(bytecode, StrategyPolicy(mode, dict(overrides or {})), **kwargs).run()
