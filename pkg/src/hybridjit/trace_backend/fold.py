"""Constant folding over TraceIR."""

from __future__ import annotations

from typing import Dict, List

from ..host_ir.ir import RetAddr
from .ir import (BINARY, DeoptSnapshot, FrameSnapshot, IfNode, Imm, LoopNode, Op, Reg, TraceIR,
                 number_guards)
from .interp import _BIN

_PURE_UNARY = {
    "retaddr_pc": lambda ra: ra.pc,
    "retaddr_fp": lambda ra: ra.fp,
}


def _subst(x, known: Dict[Reg, object]):
    if isinstance(x, Reg) and x in known:
        return Imm(known[x])
    return x


def _subst_snapshot(s: DeoptSnapshot, known) -> DeoptSnapshot:
    frames = tuple(FrameSnapshot(f.function, f.block, f.index,
                                 tuple((k, _subst(v, known)) for k, v in f.env), f.ret_dst)
                   for f in s.frames)
    return DeoptSnapshot(frames, s.pc)


def _identity(op: Op):
    """add(x, 0), add(0, x), sub(x, 0), mul(x, 1), mul(1, x) -> the other operand."""
    a, b = op.args
    if op.name == "add":
        if isinstance(b, Imm) and b.value == 0 and b.value is not False:
            return a
        if isinstance(a, Imm) and a.value == 0 and a.value is not False:
            return b
    elif op.name == "sub":
        if isinstance(b, Imm) and b.value == 0 and b.value is not False:
            return a
    elif op.name == "mul":
        if isinstance(b, Imm) and b.value == 1 and b.value is not True:
            return a
        if isinstance(a, Imm) and a.value == 1 and a.value is not True:
            return b
    return None


def _fold_body(nodes, known: Dict[Reg, object]) -> List:
    out: List = []
    for node in nodes:
        if isinstance(node, IfNode):
            cond = _subst(node.cond, known)
            if isinstance(cond, Imm):
                out.extend(_fold_body(node.then if cond.value else node.orelse, dict(known)))
            else:
                out.append(IfNode(cond, _fold_body(node.then, dict(known)),
                                  _fold_body(node.orelse, dict(known)), node.kind))
            return out
        if isinstance(node, LoopNode):
            init = tuple(_subst(x, known) for x in node.init)
            body = _fold_body(node.body, dict(known))
            afters = {pc: (params, _fold_body(after, dict(known)))
                      for pc, (params, after) in node.afters.items()}
            out.append(LoopNode(node.entry_pc, node.params, init, body, afters))
            return out
        args = tuple(_subst(x, known) for x in node.args)
        all_const = bool(args) and all(isinstance(x, Imm) for x in args)
        name = node.name
        if name in BINARY and all_const:
            v = _BIN[name](args[0].value, args[1].value)
            known[node.dst[0]] = v
            out.append(Op("const", node.dst, (Imm(v),)))
            continue
        if name in _PURE_UNARY and all_const:
            v = _PURE_UNARY[name](args[0].value)
            known[node.dst[0]] = v
            out.append(Op("const", node.dst, (Imm(v),)))
            continue
        if name == "new_retaddr" and all_const:
            v = RetAddr(args[0].value, args[1].value)
            known[node.dst[0]] = v
            out.append(Op("const", node.dst, (Imm(v),)))
            continue
        if name in ("const", "move") and all_const:
            known[node.dst[0]] = args[0].value
            out.append(Op("const", node.dst, args))
            continue
        if name == "guard" and all_const and bool(args[0].value) == node.aux:
            continue
        if name == "guard_value" and all_const and args[0].value == node.aux:
            continue
        snap = _subst_snapshot(node.snapshot, known) if node.snapshot is not None else None
        new = Op(name, node.dst, args, node.aux, snap, node.gid)
        if name in ("add", "sub", "mul"):
            same = _identity(new)
            if same is not None:
                new = Op("move", node.dst, (same,))
        out.append(new)
    return out


def fold_constants(ir: TraceIR) -> TraceIR:
    """Fold operations whose operands are all constants; drop statically true guards.

    Guard numbering is preserved so a guard keeps its identity across folding.
    Trace bodies are folded once: constants never flow around the loop back-edge.
    """
    body = _fold_body(ir.body, {})
    return TraceIR(ir.kind, ir.key, ir.inputs, body, ir.name, ir.nregs)
