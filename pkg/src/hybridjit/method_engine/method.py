"""Method-strategy compilation by tracing.

The tracer starts at a function's entry merge point with ``is_mj`` green
true, so base-language calls take the host-stack arm of the CALL handler and
become CallSites instead of being inlined. Red values are symbolic: at a red
conditional the tracer saves a checkpoint, traces the first arm to its end,
restores, and traces the second arm. Base-program loops (targets of backward
jumps inside the function) are split into a LoopNode: the path up to the loop
entry, the body ending in back-edges, and one after-trace per exit pc.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..base_language.bytecode import BytecodeProgram, backward_targets
from ..host_ir.ir import HostFunction, HostProgram
from ..trace_backend.ir import IfNode, LoopNode, Op, TraceIR, verify
from ..tracing_engine.core import Frame, Red, TraceAbort, Walker, is_red

DEFAULT_MAX_IFS = 64
DEFAULT_MAX_OPS = 20_000
DEFAULT_MAX_MERGES = 100_000


class BranchBlowUp(TraceAbort):
    reason = "branch blow-up"


class UnstructuredLoop(TraceAbort):
    reason = "unstructured loop"


class UnknownCallee(TraceAbort):
    reason = "unknown callee"


@dataclass
class _LoopCtx:
    entry: int
    end: int
    node: LoopNode
    exits: List[int] = field(default_factory=list)


class _SymbolicStack(list):
    """Placeholder for the user stack; method tracing never reads its contents."""


class TracerCheckpoint:
    """Saved tracer state at a red conditional.

    Red memory is symbolic during method tracing (every stack access is
    residue), so the checkpoint is the host activation chain with its
    variable environments plus the residue length of the enclosing segment.
    """

    def __init__(self, frames: List[Frame], residue_len: int):
        self.frames = [f.copy() for f in frames]
        self.residue_len = residue_len

    def restore(self) -> List[Frame]:
        return [f.copy() for f in self.frames]


class MethodTracer(Walker):
    def __init__(self, program: HostProgram, bytecode: BytecodeProgram, entry: int, *,
                 max_ifs: int = DEFAULT_MAX_IFS, max_ops: int = DEFAULT_MAX_OPS,
                 max_merges: int = DEFAULT_MAX_MERGES, else_first: bool = False):
        super().__init__(program, bytecode, is_mj=True, max_ops=max_ops)
        self.entry = entry
        self.max_ifs = max_ifs
        self.max_merges = max_merges
        self.else_first = else_first
        self.ifs = 0
        self.merges = 0
        self.info = bytecode.function_at(entry)
        start, end = next((s, e) for name, s, e in bytecode.regions() if s == entry)
        self.region = (start, end)
        self.loop_heads: Dict[int, int] = {
            head: max(srcs) for head, srcs in backward_targets(bytecode, start, end).items()}
        self.stack = _SymbolicStack()

    def _frames_at(self, pc: int, sp, fp) -> List[Frame]:
        fn = self.program.dispatch_function
        env = {"bytecode": self.bytecode.code, "pc": pc, "stack": self.stack, "sp": sp, "fp": fp}
        return [Frame(fn, fn.entry, 0, env)]

    def trace(self) -> TraceIR:
        r_sp, r_fp = self.new_reg(), self.new_reg()
        body: List = []
        self.trace_path(self._frames_at(self.entry, Red(r_sp), Red(r_fp)), body, [], True)
        ir = TraceIR("method", self.entry, (r_sp, r_fp), body, self.info.name, self.nregs)
        verify(ir)
        return ir

    # Alg. 3 dispatch over the kinds of interpreter operations
    def trace_path(self, frames: List[Frame], out: List, loops: List[_LoopCtx], first: bool) -> None:
        saved, self.out = self.out, out
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
                    if self._merge(f, loops):
                        return
                    f.idx += 1
                elif ev == "red_branch":
                    self.trace_cond(frames, loops)
                    return
                elif ev == "dispatch_call":
                    self.trace_function(f, ins)
                elif ev == "dispatch_ret":
                    self.emit(Op("ret", (), (self.operand(self.value(f, ins.args[0])),)))
                    return
                else:
                    self.emit(Op("fatal"))
                    return
        finally:
            self.out = saved

    def _merge(self, f: Frame, loops: List[_LoopCtx]) -> bool:
        """Handle a merge point; True when the current path ends here."""
        env = f.env
        pc, sp, fp = env["pc"], env["sp"], env["fp"]
        if is_red(pc):
            # the user-stack return arm: control leaves the function through the interpreter
            self.emit(Op("exit", (), (pc.reg, self.operand(sp), self.operand(fp))))
            return True
        self.merges += 1
        if self.merges > self.max_merges:
            raise TraceAbort(f"method tracing exceeded {self.max_merges} merge points")
        if loops:
            inner = loops[-1]
            if pc == inner.entry:
                self.emit(Op("jump_loop", (), (self.operand(sp), self.operand(fp)), pc))
                return True
            if not inner.entry <= pc <= inner.end:
                if pc not in inner.exits:
                    inner.exits.append(pc)
                self.emit(Op("jump_after", (), (self.operand(sp), self.operand(fp)), pc))
                return True
        active = {c.entry for c in loops}
        for head, end in self.loop_heads.items():
            if head < pc <= end and head not in active:
                raise UnstructuredLoop(f"pc {pc} enters the loop at {head} without passing its entry")
        if pc in self.loop_heads and pc not in active:
            self.trace_loop(pc, sp, fp, loops)
            return True
        return False

    def trace_cond(self, frames: List[Frame], loops: List[_LoopCtx]) -> IfNode:
        """Backtrack over both arms of a red conditional."""
        f = frames[-1]
        ins = f.instr()
        kind = "return" if HostFunction.handler_of(f.block) == "RETURN" else "cond"
        if kind == "cond":
            self.ifs += 1
            if self.ifs > self.max_ifs:
                raise BranchBlowUp(f"more than {self.max_ifs} conditionals in {self.info.name}")
        cond = self.value(f, ins.args[0])
        node = IfNode(cond.reg, [], [], kind)
        self.out.append(node)
        checkpoint = TracerCheckpoint(frames, len(self.out))
        arms = [(ins.targets[0], node.then), (ins.targets[1], node.orelse)]
        if self.else_first:
            arms.reverse()
        for target, residue in arms:
            arm = checkpoint.restore()
            arm[-1].block, arm[-1].idx = target, 0
            self.trace_path(arm, residue, loops, False)
        return node

    def trace_loop(self, head: int, sp, fp, loops: List[_LoopCtx]) -> LoopNode:
        """Emit a LoopNode: body until back-edges, then one after-trace per exit."""
        params = (self.new_reg(), self.new_reg())
        node = LoopNode(head, params, (self.operand(sp), self.operand(fp)), [])
        self.out.append(node)
        ctx = _LoopCtx(head, self.loop_heads[head], node)
        self.trace_path(self._frames_at(head, Red(params[0]), Red(params[1])), node.body,
                        loops + [ctx], True)
        for pc in ctx.exits:
            aparams = (self.new_reg(), self.new_reg())
            residue: List = []
            node.afters[pc] = (aparams, residue)
            # the exit pc itself may leave an enclosing loop, so its merge point is not skipped
            self.trace_path(self._frames_at(pc, Red(aparams[0]), Red(aparams[1])), residue, loops, False)
        return node

    def trace_function(self, f: Frame, ins) -> None:
        """CallSite: leave the base-language call as a call instruction."""
        a = [self.value(f, x) for x in ins.args]
        target = a[1]
        if is_red(target) or self.bytecode.function_at(target) is None:
            raise UnknownCallee(f"call target {target!r} is not a function entry")
        dst = self.new_reg()
        self.emit(Op("call", (dst,), (self.operand(a[3]), self.operand(a[4])), target))
        if ins.dst is not None:
            f.env[ins.dst] = Red(dst)
        f.idx += 1


def jit_meta_method(program: HostProgram, bytecode: BytecodeProgram, entry: int,
                    **kwargs) -> Optional[TraceIR]:
    """Compile the function starting at ``entry``; None when ``entry`` is not a method entry."""
    if bytecode.function_at(entry) is None:
        return None
    return MethodTracer(program, bytecode, entry, **kwargs).trace()


def call_sites(ir: TraceIR) -> List[int]:
    from ..trace_backend.ir import walk
    return [n.aux for n in walk(ir.body) if isinstance(n, Op) and n.name == "call"]


def if_nodes(ir: TraceIR, kind: str = "cond") -> List[IfNode]:
    from ..trace_backend.ir import walk
    return [n for n in walk(ir.body) if isinstance(n, IfNode) and n.kind == kind]
