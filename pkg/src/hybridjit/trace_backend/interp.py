"""Direct TraceIR interpreter; the oracle the generated code is checked against."""

from __future__ import annotations

from typing import Optional

from ..host_ir.ir import RetAddr
from ..host_ir.machine import HostFailure
from .ir import IfNode, Imm, LoopNode, MalformedTrace, Reg, TraceIR

_BIN = {
    "add": lambda a, b: a + b, "sub": lambda a, b: a - b, "mul": lambda a, b: a * b,
    "lt": lambda a, b: a < b, "le": lambda a, b: a <= b, "eq": lambda a, b: a == b,
}


def interpret_ir(ir: TraceIR, stack, inputs, *, call=None, callout=None, output=None,
                 force_guard: Optional[int] = None):
    """Run ``ir`` with the same calling convention as the compiled unit."""
    out = output if output is not None else []
    regs = dict(zip(ir.inputs, inputs))

    def val(x):
        if isinstance(x, Imm):
            return x.value
        try:
            return regs[x]
        except KeyError:
            raise MalformedTrace(f"{x} read before written") from None

    def run(nodes):
        for node in nodes:
            if isinstance(node, IfNode):
                return run(node.then if val(node.cond) else node.orelse)
            if isinstance(node, LoopNode):
                return run_loop(node)
            n, a = node.name, node.args
            if n in _BIN:
                regs[node.dst[0]] = _BIN[n](val(a[0]), val(a[1]))
            elif n in ("const", "move"):
                regs[node.dst[0]] = val(a[0])
            elif n == "stack_load":
                regs[node.dst[0]] = stack[val(a[0])]
            elif n in ("stack_store", "push_flag"):
                stack[val(a[0])] = val(a[1])
            elif n == "new_retaddr":
                regs[node.dst[0]] = RetAddr(val(a[0]), val(a[1]))
            elif n == "retaddr_pc":
                regs[node.dst[0]] = val(a[0]).pc
            elif n == "retaddr_fp":
                regs[node.dst[0]] = val(a[0]).fp
            elif n == "print":
                out.append(int(val(a[0])))
            elif n in ("guard", "guard_value"):
                if n == "guard":
                    ok = bool(val(a[0])) == node.aux
                else:
                    ok = val(a[0]) == node.aux
                if not ok or node.gid == force_guard:
                    return ("guard", (node.gid,) + tuple(val(r) for r in node.snapshot.registers()))
            elif n == "call":
                regs[node.dst[0]] = call(node.aux, stack, val(a[0]), val(a[1]))
            elif n == "callout":
                res = callout(node.aux, stack, val(a[0]), val(a[1]))
                for r, v in zip(node.dst, res):
                    regs[r] = v
            elif n == "ret":
                return ("ret", val(a[0]))
            elif n == "exit":
                return ("ret", (val(a[0]), val(a[1]), val(a[2])))
            elif n == "fatal":
                raise HostFailure("flag mismatch at RETURN")
            elif n in ("jump", "jump_loop"):
                return (n, (val(a[0]), val(a[1])))
            elif n == "jump_after":
                return (n, node.aux, (val(a[0]), val(a[1])))
            else:
                raise MalformedTrace(f"unknown op {n}")
        raise MalformedTrace("segment falls off its end")

    def run_loop(node: LoopNode):
        vals = [val(x) for x in node.init]
        while True:
            for p, v in zip(node.params, vals):
                regs[p] = v
            sig = run(node.body)
            if sig[0] == "jump_loop":
                vals = sig[1]
                continue
            if sig[0] == "jump_after":
                params, after = node.afters[sig[1]]
                for p, v in zip(params, sig[2]):
                    regs[p] = v
                return run(after)
            return sig

    while True:
        sig = run(ir.body)
        if sig[0] == "jump":
            for r, v in zip(ir.inputs, sig[1]):
                regs[r] = v
            continue
        if sig[0] in ("guard", "ret"):
            return sig[1]
        raise MalformedTrace(f"unexpected {sig[0]} at unit top level")
