"""Machinery shared by the trace-strategy and method-strategy tracers.

Host variables hold either a plain Python value (green) or a ``Red`` that
names the trace register carrying the value at run time. The only seeds of
red are the red variables listed at the merge point; everything computed from
a red operand is red too.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from ..host_ir.ir import Const, Flag, HostFunction, HostInstr, HostProgram
from ..host_ir.machine import HostFailure
from ..host_ir.semantics import PURE, RESIDUE_NAME
from ..trace_backend.ir import DeoptSnapshot, FrameSnapshot, Imm, Op, Reg

UNKNOWN = object()  # concrete value of a red under symbolic (method) tracing


class Red:
    """A red host value; ``value`` is its concrete value when known."""

    __slots__ = ("reg", "value")

    def __init__(self, reg: Reg, value=UNKNOWN):
        self.reg = reg
        self.value = value

    def __repr__(self) -> str:
        return f"Red({self.reg})"


def is_red(x) -> bool:
    return x.__class__ is Red


class TraceAbort(Exception):
    """Tracing gave up; the runtime decides whether to blacklist."""

    reason = "abort"


class TraceTooLong(TraceAbort):
    reason = "trace too long"


class NonLoopingPath(TraceAbort):
    reason = "non-looping path"


class LeftDispatchLoop(TraceAbort):
    reason = "left the dispatch loop"


class LeftTraceRegion(TraceAbort):
    reason = "reached code owned by another strategy"


class Frame:
    __slots__ = ("fn", "block", "idx", "env", "ret_dst")

    def __init__(self, fn: HostFunction, block: str, idx: int, env: Dict[str, object],
                 ret_dst: Optional[str] = None):
        self.fn = fn
        self.block = block
        self.idx = idx
        self.env = env
        self.ret_dst = ret_dst

    def copy(self) -> "Frame":
        return Frame(self.fn, self.block, self.idx, dict(self.env), self.ret_dst)

    def instr(self) -> HostInstr:
        return self.fn.blocks[self.block][self.idx]


class Walker:
    """Host-IR evaluator that folds greens and records residue for reds."""

    def __init__(self, program: HostProgram, bytecode, *, is_mj: bool, max_ops: int):
        self.program = program
        self.bytecode = bytecode
        self.is_mj = is_mj
        self.max_ops = max_ops
        self.nregs = 0
        self.nops = 0
        self.out: List = []

    # registers and residue
    def new_reg(self) -> Reg:
        r = Reg(self.nregs)
        self.nregs += 1
        return r

    def emit(self, op: Op) -> Op:
        self.nops += 1
        if self.nops > self.max_ops:
            raise TraceTooLong(f"residue exceeded {self.max_ops} operations")
        self.out.append(op)
        return op

    @staticmethod
    def operand(x):
        return x.reg if is_red(x) else Imm(x)

    @staticmethod
    def value(frame: Frame, a):
        if isinstance(a, Const):
            return a.value
        return frame.env[a]

    def snapshot(self, frames: List[Frame], toward: Optional[str] = None) -> DeoptSnapshot:
        """Snapshot resuming every frame at its current instruction.

        Resuming re-executes that instruction, so a guard's snapshot re-tests
        the branch condition and stays sound even when the guard is forced to
        fail. ``toward`` names the block deopt normally lands in, used only to
        predict the resume pc shown in listings.
        """
        snaps = tuple(FrameSnapshot(f.fn.name, f.block, f.idx,
                                    tuple((k, self.operand(v)) for k, v in f.env.items()), f.ret_dst)
                      for f in frames)
        return DeoptSnapshot(snaps, self.predict_pc(frames, toward))

    def predict_pc(self, frames: List[Frame], block: Optional[str]) -> Optional[int]:
        """Best-effort resume pc for listings, following green control flow only.

        When the target cannot be followed statically, the pc of the
        instruction whose handler the guard sits in is reported instead.
        """
        here = frames[0].env.get("pc")
        here = None if is_red(here) else here
        if len(frames) != 1 or block is None:
            return here
        f = frames[0]
        env = dict(f.env)
        seen = set()
        while block not in seen:
            seen.add(block)
            for ins in f.fn.blocks[block]:
                if ins.op in PURE:
                    args = [env.get(a) if isinstance(a, str) else a.value for a in ins.args]
                    known = all(x is not None and not is_red(x) for x in args)
                    env[ins.dst] = PURE[ins.op](*args) if known else None
                elif ins.dst is not None:
                    env[ins.dst] = None
                if ins.op == "jump":
                    block = ins.targets[0]
                elif ins.op == "branch":
                    c = env.get(ins.args[0]) if isinstance(ins.args[0], str) else ins.args[0].value
                    block = ins.targets[0] if c is None or is_red(c) or c else ins.targets[1]
                elif ins.op in ("ret", "fail"):
                    return here
            if block == f.fn.entry:
                break
        pc = env.get("pc")
        return here if pc is None or is_red(pc) else pc

    # instruction semantics shared by both tracers
    def eval_fold(self, frame: Frame, ins: HostInstr) -> None:
        """Execute ``ins`` on greens, or emit residue when any operand is red."""
        args = [self.value(frame, a) for a in ins.args]
        if not any(is_red(a) for a in args):
            frame.env[ins.dst] = PURE[ins.op](*args)
            return
        if ins.op == "move":
            frame.env[ins.dst] = args[0]
            return
        dst = self.new_reg()
        conc = UNKNOWN
        if all(not is_red(a) or a.value is not UNKNOWN for a in args):
            conc = PURE[ins.op](*[a.value if is_red(a) else a for a in args])
        self.emit(Op(RESIDUE_NAME[ins.op], (dst,), tuple(self.operand(a) for a in args)))
        frame.env[ins.dst] = Red(dst, conc)

    def step(self, frames: List[Frame]) -> Optional[str]:
        """Execute one host instruction of the innermost frame.

        Returns None after ordinary instructions, or the name of an event the
        concrete tracer must handle itself (merge point, red branch, dispatch
        call, return from the dispatch function).
        """
        f = frames[-1]
        ins = f.instr()
        op = ins.op
        if op in PURE:
            self.eval_fold(f, ins)
        elif op == "const":
            f.env[ins.dst] = ins.args[0].value
        elif op == "array_read":
            arr, idx = self.value(f, ins.args[0]), self.value(f, ins.args[1])
            if isinstance(arr, tuple):
                if is_red(idx):
                    raise TraceAbort("red index into the bytecode")
                f.env[ins.dst] = arr[idx]
            else:
                f.env[ins.dst] = self.stack_load(idx)
        elif op == "array_write":
            idx, v = self.value(f, ins.args[1]), self.value(f, ins.args[2])
            self.stack_store(idx, v)
        elif op == "print":
            self.do_print(self.value(f, ins.args[0]))
        elif op == "is_mj":
            f.env[ins.dst] = self.is_mj
        elif op in ("probe", "can_enter_jit"):
            pass
        elif op == "jump":
            f.block, f.idx = ins.targets[0], 0
            return None
        elif op == "branch":
            c = self.value(f, ins.args[0])
            if is_red(c):
                return "red_branch"
            f.block, f.idx = ins.targets[0 if c else 1], 0
            return None
        elif op == "call":
            if ins.fn == self.program.dispatch:
                return "dispatch_call"
            callee = self.program.functions[ins.fn]
            env = {p: self.value(f, a) for p, a in zip(callee.params, ins.args)}
            f.idx += 1
            frames.append(Frame(callee, callee.entry, 0, env, ins.dst))
            return None
        elif op == "ret":
            if len(frames) == 1:
                return "dispatch_ret"
            v = self.value(f, ins.args[0])
            frames.pop()
            if f.ret_dst is not None:
                frames[-1].env[f.ret_dst] = v
            return None
        elif op == "fail":
            return "fail"
        elif op == "jit_merge_point":
            if len(frames) != 1:
                raise TraceAbort("merge point inside an inlined activation")
            return "merge"
        else:
            raise HostFailure(f"tracer cannot evaluate host op {op}")
        f.idx += 1
        return None

    # memory and output; overridden by the concrete/symbolic tracers
    def stack_load(self, idx):
        dst = self.new_reg()
        self.emit(Op("stack_load", (dst,), (self.operand(idx),)))
        return Red(dst)

    def stack_store(self, idx, v):
        if isinstance(v, Flag):
            self.emit(Op("push_flag", (), (self.operand(idx), Imm(v))))
        else:
            self.emit(Op("stack_store", (), (self.operand(idx), self.operand(v))))

    def do_print(self, v):
        self.emit(Op("print", (), (self.operand(v),)))
