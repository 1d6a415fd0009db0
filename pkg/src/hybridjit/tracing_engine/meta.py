"""Trace-strategy meta-tracing.

The tracer runs the interpreter definition on the live interpreter state,
recording residue as it goes, starting at the merge point for a hot key and
stopping when the same key is reached again. Red conditional branches follow
the concrete direction and leave a guard behind. Interpreter-level calls are
inlined. Tracing never loses work: on abort the remaining part of the current
interpreter step is finished concretely so the caller can resume at a merge
point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Tuple

from ..host_ir.ir import Flag, HostProgram
from ..host_ir.machine import HostFailure
from ..trace_backend.ir import Op, TraceIR, number_guards, verify
from .core import Frame, LeftDispatchLoop, LeftTraceRegion, NonLoopingPath, Red, TraceAbort, Walker, is_red

DEFAULT_MAX_OPS = 20_000
DEFAULT_MAX_MERGES = 10_000


class ExecutionContext:
    """What concrete tracing and deopt resume need from the runtime."""

    def __init__(self, stack: list, output: list, counters=None):
        self.stack = stack
        self.output = output
        self.counters = counters  # flag-balance instrumentation, optional

    def count_read(self, v):
        if self.counters is not None and v.__class__ is Flag:
            self.counters.flag_reads += 1

    def count_write(self, v):
        if self.counters is not None and v.__class__ is Flag:
            self.counters.flag_pushes += 1

    def hs_call(self, entry: int, stack, sp: int, fp: int):
        raise NotImplementedError

    def callout(self, entry: int, stack, sp: int, fp: int) -> Tuple[int, int, int]:
        raise NotImplementedError


@dataclass
class TraceOutcome:
    ir: Optional[TraceIR]
    abort: Optional[TraceAbort]
    resume: tuple  # ("state", pc, sp, fp) or ("return", value)


def _conc(x):
    return x.value if is_red(x) else x


class Stepper(Walker):
    """Plain concrete host-IR execution from an arbitrary position to the next merge point."""

    def __init__(self, program: HostProgram, bytecode, ctx: ExecutionContext, *, is_mj: bool = False):
        super().__init__(program, bytecode, is_mj=is_mj, max_ops=0)
        self.ctx = ctx

    def stack_load(self, idx):
        if idx < 0:
            raise HostFailure(f"user stack index {idx} below zero")
        v = self.ctx.stack[idx]
        self.ctx.count_read(v)
        return v

    def stack_store(self, idx, v):
        if idx < 0:
            raise HostFailure(f"user stack index {idx} below zero")
        self.ctx.count_write(v)
        self.ctx.stack[idx] = v

    def do_print(self, v):
        self.ctx.output.append(int(v))

    def run(self, frames: List[Frame]) -> tuple:
        while True:
            ev = self.step(frames)
            if ev is None:
                continue
            f = frames[-1]
            ins = f.instr()
            if ev == "merge":
                env = f.env
                return ("state", env["pc"], env["sp"], env["fp"])
            if ev == "dispatch_call":
                a = [self.value(f, x) for x in ins.args]
                v = self.ctx.hs_call(a[1], a[2], a[3], a[4])
                if ins.dst is not None:
                    f.env[ins.dst] = v
                f.idx += 1
            elif ev == "dispatch_ret":
                if self.ctx.counters is not None:
                    self.ctx.counters.last_sp = f.env["sp"]
                return ("return", self.value(f, ins.args[0]))
            elif ev == "fail":
                raise HostFailure(ins.note)
            else:
                raise HostFailure(f"unexpected event {ev} in concrete execution")


def resume_frames(program: HostProgram, bytecode, ctx: ExecutionContext, frames: List[Frame],
                  is_mj: bool = False) -> tuple:
    raw = [Frame(f.fn, f.block, f.idx, {k: _conc(v) for k, v in f.env.items()}, f.ret_dst) for f in frames]
    return Stepper(program, bytecode, ctx, is_mj=is_mj).run(raw)


class MetaTracer(Walker):
    def __init__(self, program: HostProgram, bytecode, ctx: ExecutionContext, key: int, *,
                 max_ops: int = DEFAULT_MAX_OPS, max_merges: int = DEFAULT_MAX_MERGES,
                 callout_entries: FrozenSet[int] = frozenset(), foreign: FrozenSet[int] = frozenset(),
                 name: str = ""):
        super().__init__(program, bytecode, is_mj=False, max_ops=max_ops)
        self.ctx = ctx
        self.key = key
        self.max_merges = max_merges
        self.callout_entries = callout_entries
        self.foreign = foreign  # merge points the trace may not pass (method-strategy code)
        self.name = name
        self.merges = 0

    # concrete memory effects happen after the residue is recorded
    def stack_load(self, idx):
        r = super().stack_load(idx)
        r.value = self.ctx.stack[_conc(idx)]
        self.ctx.count_read(r.value)
        return r

    def stack_store(self, idx, v):
        super().stack_store(idx, v)
        self.ctx.count_write(_conc(v))
        self.ctx.stack[_conc(idx)] = _conc(v)

    def do_print(self, v):
        super().do_print(v)
        self.ctx.output.append(int(_conc(v)))

    def trace(self, sp: int, fp: int) -> TraceOutcome:
        fn = self.program.dispatch_function
        r_sp, r_fp = self.new_reg(), self.new_reg()
        env = {"bytecode": self.bytecode.code, "pc": self.key, "stack": self.ctx.stack,
               "sp": Red(r_sp, sp), "fp": Red(r_fp, fp)}
        frames = [Frame(fn, fn.entry, 0, env)]
        first = True
        try:
            while True:
                ev = self.step(frames)
                if ev is None:
                    continue
                f = frames[-1]
                ins = f.instr()
                if ev == "merge":
                    if first:
                        first = False
                        f.idx += 1
                        continue
                    if self._at_merge(f, frames):
                        ir = TraceIR("trace", self.key, (r_sp, r_fp), self.out, self.name, self.nregs)
                        number_guards(ir)
                        verify(ir)
                        e = f.env
                        return TraceOutcome(ir, None, ("state", e["pc"], _conc(e["sp"]), _conc(e["fp"])))
                elif ev == "red_branch":
                    self.guard_for(frames)
                elif ev == "dispatch_call":
                    self._dispatch_call(f, ins)
                elif ev == "dispatch_ret":
                    raise LeftDispatchLoop("dispatch function returned during tracing")
                else:
                    raise HostFailure(ins.note)
        except TraceAbort as exc:
            return TraceOutcome(None, exc, resume_frames(self.program, self.bytecode, self.ctx, frames))

    def guard_for(self, frames: List[Frame]) -> Op:
        """Turn the red branch at the current position into a guard on the observed direction."""
        f = frames[-1]
        ins = f.instr()
        c = self.value(f, ins.args[0])
        taken = bool(c.value)
        untaken = ins.targets[1 if taken else 0]
        op = self.emit(Op("guard", (), (c.reg,), taken, self.snapshot(frames, untaken)))
        f.block, f.idx = ins.targets[0 if taken else 1], 0
        return op

    def _at_merge(self, f: Frame, frames: List[Frame]) -> bool:
        """Handle a merge point reached mid-trace; True when the trace closes."""
        while True:
            pc = f.env["pc"]
            if is_red(pc):
                self.emit(Op("guard_value", (), (pc.reg,), pc.value, self.snapshot(frames)))
                f.env["pc"] = pc = pc.value
            if pc == self.key:
                self.emit(Op("jump", (), (self.operand(f.env["sp"]), self.operand(f.env["fp"]))))
                return True
            if pc in self.callout_entries:
                sp, fp = f.env["sp"], f.env["fp"]
                dst = (self.new_reg(), self.new_reg(), self.new_reg())
                self.emit(Op("callout", dst, (self.operand(sp), self.operand(fp)), pc))
                npc, nsp, nfp = self.ctx.callout(pc, self.ctx.stack, _conc(sp), _conc(fp))
                f.env["pc"], f.env["sp"], f.env["fp"] = Red(dst[0], npc), Red(dst[1], nsp), Red(dst[2], nfp)
                continue
            if pc in self.foreign:
                raise LeftTraceRegion(f"trace of key {self.key} reached pc {pc}")
            self.merges += 1
            if self.merges > self.max_merges:
                raise NonLoopingPath(f"key {self.key} not reached within {self.max_merges} merge points")
            f.idx += 1
            return False

    def _dispatch_call(self, f: Frame, ins) -> None:
        a = [self.value(f, x) for x in ins.args]
        if is_red(a[1]):
            raise TraceAbort("host-stack call with a red target")
        dst = self.new_reg()
        self.emit(Op("call", (dst,), (self.operand(a[3]), self.operand(a[4])), a[1]))
        v = self.ctx.hs_call(a[1], self.ctx.stack, _conc(a[3]), _conc(a[4]))
        if ins.dst is not None:
            f.env[ins.dst] = Red(dst, v)
        f.idx += 1


def meta_trace(program: HostProgram, bytecode, ctx: ExecutionContext, key: int, sp: int, fp: int,
               **kwargs) -> TraceOutcome:
    """Trace one iteration of the loop at merge-point key ``key`` from state (key, sp, fp)."""
    return MetaTracer(program, bytecode, ctx, key, **kwargs).trace(sp, fp)
