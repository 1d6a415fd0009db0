"""Translate TraceIR into a Python function.

Trace units become ``def unit(stack, r0, r1)`` with the loop as ``while
True``; a failing guard returns ``(guard_id, *snapshot_registers)``. Method
units return the value of their ``ret`` or an exit tuple ``(pc, sp, fp)``.
Loop nodes become nested ``while`` loops followed by their after-traces.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from ..host_ir.ir import HS, US, Flag, RetAddr
from ..host_ir.machine import HostFailure
from .ir import BINARY, IfNode, Imm, LoopNode, Op, Reg, TraceIR, verify


class _Gen:
    def __init__(self, ir: TraceIR, force_guard: Optional[int], instrument: bool, count_iters: bool):
        self.ir = ir
        self.count_iters = count_iters
        self.force_guard = force_guard
        self.instrument = instrument
        self.lines: List[str] = []
        self.consts: Dict[str, object] = {}
        self.loops: List[tuple] = []  # (LoopNode, exit variable), innermost last

    def v(self, x) -> str:
        if isinstance(x, Reg):
            return f"r{x.n}"
        val = x.value
        if val is HS:
            return "HS"
        if val is US:
            return "US"
        if isinstance(val, (bool, int)):
            return repr(val)
        name = f"_k{len(self.consts)}"
        self.consts[name] = val
        return name

    def emit(self, d: int, text: str):
        self.lines.append("    " * d + text)

    def body(self, nodes, d: int):
        for node in nodes:
            if isinstance(node, IfNode):
                self.emit(d, f"if {self.v(node.cond)}:")
                self.body(node.then, d + 1)
                self.emit(d, "else:")
                self.body(node.orelse, d + 1)
            elif isinstance(node, LoopNode):
                self.loop(node, d)
            else:
                self.op(node, d)

    def loop(self, node: LoopNode, d: int):
        x = f"_x{len(self.loops) + 1}"
        if node.params:
            self.emit(d, f"{', '.join(self.v(p) for p in node.params)} = "
                         f"{', '.join(self.v(a) for a in node.init)}")
        self.emit(d, "while True:")
        self.loops.append((node, x))
        self.body(node.body, d + 1)
        self.loops.pop()
        first = True
        for pc in sorted(node.afters):
            params, after = node.afters[pc]
            self.emit(d, f"{'if' if first else 'elif'} {x} == {pc}:")
            self.body(after, d + 1)
            first = False
        if not first:
            self.emit(d, "else:")
            self.emit(d + 1, "raise HostFailure('loop exit without an after-trace')")

    def op(self, op: Op, d: int):
        n, a = op.name, [self.v(x) for x in op.args]
        dst = ", ".join(self.v(r) for r in op.dst)
        if n in BINARY:
            self.emit(d, f"{dst} = {a[0]} {BINARY[n]} {a[1]}")
        elif n in ("const", "move"):
            self.emit(d, f"{dst} = {a[0]}")
        elif n == "stack_load":
            self.emit(d, f"{dst} = stack[{a[0]}]")
            if self.instrument:
                self.emit(d, f"if {dst}.__class__ is Flag: _ctr.flag_reads += 1")
        elif n == "stack_store":
            self.emit(d, f"stack[{a[0]}] = {a[1]}")
        elif n == "push_flag":
            self.emit(d, f"stack[{a[0]}] = {a[1]}")
            if self.instrument:
                self.emit(d, "_ctr.flag_pushes += 1")
        elif n == "new_retaddr":
            self.emit(d, f"{dst} = RetAddr({a[0]}, {a[1]})")
        elif n == "retaddr_pc":
            self.emit(d, f"{dst} = {a[0]}.pc")
        elif n == "retaddr_fp":
            self.emit(d, f"{dst} = {a[0]}.fp")
        elif n == "print":
            self.emit(d, f"_out.append(int({a[0]}))")
        elif n in ("guard", "guard_value"):
            regs = ", ".join(self.v(r) for r in op.snapshot.registers())
            exit_tuple = f"({op.gid}, {regs}{',' if regs else ''})"
            if op.gid == self.force_guard:
                cond = "True"
            elif n == "guard":
                cond = f"not {a[0]}" if op.aux else f"{a[0]}"
            else:
                cond = f"{a[0]} != {self.v(Imm(op.aux))}"
            self.emit(d, f"if {cond}:")
            self.emit(d + 1, f"return {exit_tuple}")
        elif n == "jump":
            self.emit(d, f"r{self.ir.inputs[0].n}, r{self.ir.inputs[1].n} = {a[0]}, {a[1]}")
            self.emit(d, "continue")
        elif n == "jump_loop":
            node, _ = self.loops[-1]
            self.emit(d, f"{', '.join(self.v(p) for p in node.params)} = {a[0]}, {a[1]}")
            self.emit(d, "continue")
        elif n == "jump_after":
            node, x = self.loops[-1]
            params, _ = node.afters[op.aux]
            self.emit(d, f"{self.v(params[0])}, {self.v(params[1])} = {a[0]}, {a[1]}")
            self.emit(d, f"{x} = {op.aux}")
            self.emit(d, "break")
        elif n == "call":
            self.emit(d, f"{dst} = _call({op.aux}, stack, {a[0]}, {a[1]})")
        elif n == "callout":
            self.emit(d, f"{dst} = _callout({op.aux}, stack, {a[0]}, {a[1]})")
        elif n == "ret":
            self.emit(d, f"return {a[0]}")
        elif n == "exit":
            self.emit(d, f"return ({a[0]}, {a[1]}, {a[2]})")
        elif n == "fatal":
            self.emit(d, "raise HostFailure('flag mismatch at RETURN')")
        else:
            raise HostFailure(f"codegen: unknown op {n}")

    def generate(self) -> str:
        ins = ", ".join(self.v(r) for r in self.ir.inputs)
        self.emit(0, f"def unit(stack, {ins}):")
        if self.ir.kind == "trace" and self.count_iters:
            # a local counter is cheaper than an attribute update per iteration
            self.emit(1, "_it = 0")
            self.emit(1, "try:")
            self.emit(2, "while True:")
            self.emit(3, "_it += 1")
            self.body(self.ir.body, 3)
            self.emit(1, "finally:")
            self.emit(2, "_ctr.trace_iters += _it")
        elif self.ir.kind == "trace":
            self.emit(1, "while True:")
            self.body(self.ir.body, 2)
        else:
            self.body(self.ir.body, 1)
        return "\n".join(self.lines)


def generate_source(ir: TraceIR, force_guard: Optional[int] = None, instrument: bool = False,
                    count_iters: bool = False):
    """Return (python source, constant namespace) for ``ir``."""
    gen = _Gen(ir, force_guard, instrument, count_iters)
    src = gen.generate()
    return src, gen.consts


def compile_ir(ir: TraceIR, *, call=None, callout=None, output=None, counters=None,
               force_guard: Optional[int] = None, instrument: bool = False):
    """Verify and translate ``ir``; returns the Python callable and its source."""
    verify(ir)
    src, consts = generate_source(ir, force_guard, instrument, counters is not None)
    ns = {"HS": HS, "US": US, "Flag": Flag, "RetAddr": RetAddr, "HostFailure": HostFailure,
          "_call": call, "_callout": callout, "_out": output if output is not None else [],
          "_ctr": counters}
    ns.update(consts)
    exec(compile(src, f"<unit {ir.kind}@{ir.key}>", "exec"), ns)
    return ns["unit"], src
