"""Residue optimization: address arithmetic, redundant loads, dead code.

Meta-traced residue is dominated by stack-pointer bookkeeping: every push and
pop of the interpreter leaves an ``add``/``sub`` on sp and a store/load pair.
Registers are assigned once per pass over a segment, so facts learned earlier
in a segment hold for the rest of it:

* ``rB + c`` chains collapse to one offset from a base register, and equal
  (base, offset) pairs share a register;
* pure operations with equal operands are computed once;
* a load from an address with a known stored value becomes that value
  (addresses with the same base and different offsets never alias; anything
  else is assumed to alias, and calls forget everything);
* operations whose results are never read are dropped;
* a store overwritten by a later store to the same address, with no read,
  call, guard or exit in between, is dropped;
* a conditional whose arms are identical is replaced by one arm.

Callers may pass ``facts`` relating input registers (``r0 = r1 + k``), which
lets addresses built from either register be compared.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from ..host_ir.ir import RetAddr
from .interp import _BIN
from .ir import BINARY, DeoptSnapshot, FrameSnapshot, IfNode, Imm, LoopNode, Op, Reg, TraceIR, walk

_PURE = set(BINARY) | {"const", "move", "stack_load", "new_retaddr", "retaddr_pc", "retaddr_fp"}
_KILLS_MEMORY = ("call", "callout")
_DEAD = object()


def _int_imm(x) -> bool:
    return isinstance(x, Imm) and type(x.value) is int


class _Env:
    def __init__(self):
        self.alias: Dict[Reg, object] = {}
        self.affine: Dict[Reg, Tuple[Reg, int]] = {}
        self.exprs: Dict[tuple, Reg] = {}
        self.mem: Dict[tuple, object] = {}
        self.retaddr: Dict[Reg, Tuple[object, object]] = {}

    def copy(self, keep_memory: bool = True) -> "_Env":
        e = _Env()
        e.alias = dict(self.alias)
        e.affine = dict(self.affine)
        e.exprs = dict(self.exprs)
        e.mem = dict(self.mem) if keep_memory else {}
        e.retaddr = dict(self.retaddr)
        return e

    def canon(self, x):
        if isinstance(x, Reg):
            return self.alias.get(x, x)
        return x

    def address(self, x) -> tuple:
        if isinstance(x, Reg):
            return self.affine.get(x, (x, 0))
        return (None, x.value)


class _Optimizer:
    def __init__(self, forward_memory: bool):
        self.forward_memory = forward_memory

    def segment(self, nodes, env: _Env) -> List:
        out: List = []
        self.pending: Dict[tuple, int] = {}  # address -> index in out of an unread store
        try:
            self._segment(nodes, env, out)
        finally:
            self.pending = {}
        return [n for n in out if n is not _DEAD]

    def _segment(self, nodes, env: _Env, out: List) -> None:
        for node in nodes:
            if isinstance(node, IfNode):
                cond = env.canon(node.cond)
                if isinstance(cond, Imm):
                    self._segment(node.then if cond.value else node.orelse, env, out)
                    return
                self.pending = {}
                then = self.segment(node.then, env.copy())
                orelse = self.segment(node.orelse, env.copy())
                if _same_body(then, orelse):
                    out.extend(then)
                else:
                    out.append(IfNode(cond, then, orelse, node.kind))
                return
            if isinstance(node, LoopNode):
                self.pending = {}
                init = tuple(env.canon(x) for x in node.init)
                body = self.segment(node.body, env.copy(keep_memory=False))
                afters = {pc: (params, self.segment(after, env.copy(keep_memory=False)))
                          for pc, (params, after) in node.afters.items()}
                out.append(LoopNode(node.entry_pc, node.params, init, body, afters))
                return
            new = self.op(node, env)
            if new is not None:
                self.track_stores(new, env, out)
                out.append(new)

    def track_stores(self, op: Op, env: _Env, out: List) -> None:
        if not self.forward_memory:
            return
        name, pending = op.name, self.pending
        if name in ("stack_store", "push_flag"):
            key = env.address(op.args[0])
            prev = pending.get(key)
            if prev is not None:
                out[prev] = _DEAD
            pending[key] = len(out)
        elif name == "stack_load":
            key = env.address(op.args[0])
            for k in list(pending):
                if k[0] != key[0] or k == key:
                    del pending[k]
        elif name not in _PURE and name != "print":
            pending.clear()

    def op(self, node: Op, env: _Env) -> Optional[Op]:
        name = node.name
        args = tuple(env.canon(x) for x in node.args)
        dst = node.dst[0] if node.dst else None
        if name in ("move", "const"):
            env.alias[dst] = args[0]
            return None
        if name in BINARY:
            if all(isinstance(a, Imm) for a in args):
                env.alias[dst] = Imm(_BIN[name](args[0].value, args[1].value))
                return None
            if name in ("add", "sub"):
                folded = self.affine(name, args, dst, env)
                if folded is not False:
                    return folded
            return self.cse(Op(name, node.dst, args), env)
        if name == "stack_load":
            key = env.address(args[0])
            if self.forward_memory and key in env.mem:
                env.alias[dst] = env.mem[key]
                return None
            if self.forward_memory:
                env.mem[key] = dst
            return Op(name, node.dst, args)
        if name in ("stack_store", "push_flag"):
            key = env.address(args[0])
            for k in list(env.mem):
                if k[0] != key[0] or k == key:
                    del env.mem[k]
            if self.forward_memory:
                env.mem[key] = args[1]
            return Op(name, node.dst, args)
        if name == "new_retaddr":
            new = self.cse(Op(name, node.dst, args), env)
            env.retaddr[dst] = args
            return new
        if name in ("retaddr_pc", "retaddr_fp"):
            src = args[0]
            if isinstance(src, Imm) and isinstance(src.value, RetAddr):
                v = src.value.pc if name == "retaddr_pc" else src.value.fp
                env.alias[dst] = Imm(v)
                return None
            if src in env.retaddr:
                env.alias[dst] = env.retaddr[src][0 if name == "retaddr_pc" else 1]
                return None
            return self.cse(Op(name, node.dst, args), env)
        if name in _KILLS_MEMORY:
            env.mem.clear()
        if name == "guard" and isinstance(args[0], Imm) and bool(args[0].value) == node.aux:
            return None
        if name == "guard_value" and isinstance(args[0], Imm) and args[0].value == node.aux:
            return None
        snap = _canon_snapshot(node.snapshot, env) if node.snapshot is not None else None
        return Op(name, node.dst, args, node.aux, snap, node.gid)

    def affine(self, name, args, dst, env: _Env):
        a, b = args
        if isinstance(a, Reg) and _int_imm(b):
            base, k = env.affine.get(a, (a, 0))
            off = k + b.value if name == "add" else k - b.value
        elif name == "add" and _int_imm(a) and isinstance(b, Reg):
            base, k = env.affine.get(b, (b, 0))
            off = k + a.value
        else:
            return False
        if off == 0:
            env.alias[dst] = base
            return None
        key = ("affine", base, off)
        if key in env.exprs:
            env.alias[dst] = env.exprs[key]
            return None
        env.exprs[key] = dst
        env.affine[dst] = (base, off)
        return Op("add", (dst,), (base, Imm(off)))

    @staticmethod
    def cse(op: Op, env: _Env) -> Optional[Op]:
        key = (op.name,) + op.args
        prev = env.exprs.get(key)
        if prev is not None:
            env.alias[op.dst[0]] = prev
            return None
        env.exprs[key] = op.dst[0]
        return op


def _canon_snapshot(snap: DeoptSnapshot, env: _Env) -> DeoptSnapshot:
    frames = tuple(FrameSnapshot(f.function, f.block, f.index,
                                 tuple((k, env.canon(v)) for k, v in f.env), f.ret_dst)
                   for f in snap.frames)
    return DeoptSnapshot(frames, snap.pc)


def _node_key(node):
    if isinstance(node, Op):
        return ("op", node.name, node.dst, node.args, repr(node.aux), node.gid,
                node.snapshot)
    if isinstance(node, IfNode):
        return ("if", node.cond, node.kind, tuple(map(_node_key, node.then)),
                tuple(map(_node_key, node.orelse)))
    return ("loop", id(node))


def _same_body(a: List, b: List) -> bool:
    return len(a) == len(b) and all(_node_key(x) == _node_key(y) for x, y in zip(a, b))


def _uses(body) -> Dict[Reg, int]:
    counts: Dict[Reg, int] = {}

    def use(x):
        if isinstance(x, Reg):
            counts[x] = counts.get(x, 0) + 1

    for node in walk(body):
        if isinstance(node, IfNode):
            use(node.cond)
        elif isinstance(node, LoopNode):
            for x in node.init:
                use(x)
        else:
            for x in node.args:
                use(x)
            if node.snapshot is not None:
                for r in node.snapshot.registers():
                    use(r)
    return counts


def _sweep(body, used) -> Tuple[List, bool]:
    out: List = []
    changed = False
    for node in body:
        if isinstance(node, IfNode):
            then, c1 = _sweep(node.then, used)
            orelse, c2 = _sweep(node.orelse, used)
            changed |= c1 or c2
            out.append(IfNode(node.cond, then, orelse, node.kind))
        elif isinstance(node, LoopNode):
            body2, c = _sweep(node.body, used)
            changed |= c
            afters = {}
            for pc, (params, after) in node.afters.items():
                after2, c = _sweep(after, used)
                changed |= c
                afters[pc] = (params, after2)
            out.append(LoopNode(node.entry_pc, node.params, node.init, body2, afters))
        elif node.name in _PURE and not any(d in used for d in node.dst):
            changed = True
        else:
            out.append(node)
    return out, changed


def eliminate_dead(body) -> List:
    while True:
        body, changed = _sweep(body, _uses(body))
        if not changed:
            return body


def optimize(ir: TraceIR, *, forward_memory: bool = True,
             facts: Optional[Dict[Reg, Tuple[Reg, int]]] = None) -> TraceIR:
    """Return an equivalent, usually shorter, unit. Guard numbers are preserved.

    ``forward_memory`` enables the load and store rewrites; ``facts`` maps an
    input register to (other input, offset) known to hold on every entry.
    """
    env = _Env()
    for reg, (base, off) in (facts or {}).items():
        env.affine[reg] = (base, off)
        env.exprs[("affine", base, off)] = reg
    body = _Optimizer(forward_memory).segment(ir.body, env)
    body = eliminate_dead(body)
    return TraceIR(ir.kind, ir.key, ir.inputs, body, ir.name, ir.nregs)
