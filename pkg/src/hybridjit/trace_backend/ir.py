"""TraceIR: the residue language produced by both tracing strategies.

A unit body is a list of nodes. Plain operations are ``Op``; method units may
also contain ``IfNode`` and ``LoopNode`` trees. Registers are virtual and
unbounded. Trace units take the red merge-point state ``(sp, fp)`` as input
registers and run until a guard fails; method units take the callee frame
``(sp, fp)`` and return a value or an exit state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union


@dataclass(frozen=True)
class Reg:
    n: int

    def __str__(self) -> str:
        return f"r{self.n}"


@dataclass(frozen=True)
class Imm:
    value: object

    def __str__(self) -> str:
        return f"${self.value!r}"


Operand = Union[Reg, Imm]

BINARY = {"add": "+", "sub": "-", "mul": "*", "lt": "<", "le": "<=", "eq": "=="}
# name -> (number of results, number of operands); None means variadic
SIGNATURES = {
    "const": (1, 1), "move": (1, 1),
    **{k: (1, 2) for k in BINARY},
    "stack_load": (1, 1), "stack_store": (0, 2), "push_flag": (0, 2),
    "new_retaddr": (1, 2), "retaddr_pc": (1, 1), "retaddr_fp": (1, 1),
    "print": (0, 1),
    "guard": (0, 1), "guard_value": (0, 1),
    "jump": (0, 2), "jump_loop": (0, 2), "jump_after": (0, 2),
    "call": (1, 2), "callout": (3, 2),
    "ret": (0, 1), "exit": (0, 3), "fatal": (0, 0),
}
TERMINAL = ("jump", "jump_loop", "jump_after", "ret", "exit", "fatal")


@dataclass(frozen=True)
class FrameSnapshot:
    """One host-level activation to rebuild on deoptimization."""

    function: str
    block: str
    index: int
    env: Tuple[Tuple[str, Operand], ...]
    ret_dst: Optional[str] = None


@dataclass(frozen=True)
class DeoptSnapshot:
    """Maps trace registers and folded constants back to interpreter cells.

    Frames are listed outermost first; the first frame is the dispatch
    function, where interpretation resumes once the inner frames return.
    """

    frames: Tuple[FrameSnapshot, ...]
    pc: Optional[int] = None  # predicted resume pc, for listings

    def registers(self) -> Tuple[Reg, ...]:
        seen: List[Reg] = []
        for f in self.frames:
            for _, v in f.env:
                if isinstance(v, Reg) and v not in seen:
                    seen.append(v)
        return tuple(seen)


@dataclass(eq=False)
class Op:
    name: str
    dst: Tuple[Reg, ...] = ()
    args: Tuple[Operand, ...] = ()
    # guard: expected truth value; call/callout: callee entry pc; jump_*: target pc
    aux: object = None
    snapshot: Optional[DeoptSnapshot] = None
    gid: int = -1  # guard number within its unit

    def __str__(self) -> str:
        lhs = ", ".join(map(str, self.dst))
        text = (lhs + " = " if lhs else "") + self.name
        if self.aux is not None:
            text += f"[{self.aux}]"
        if self.args:
            text += " " + ", ".join(map(str, self.args))
        if self.snapshot is not None:
            pc = "?" if self.snapshot.pc is None else self.snapshot.pc
            text += f"  ; guard #{self.gid} deopt pc={pc}"
        return text


@dataclass(eq=False)
class IfNode:
    cond: Operand
    then: List["Node"]
    orelse: List["Node"]
    kind: str = "cond"  # "cond" for base-program conditionals, "return" for the flag protocol


@dataclass(eq=False)
class LoopNode:
    """tr.1 is the code before this node; tr.2 is ``body``; tr.3 are ``afters``."""

    entry_pc: int
    params: Tuple[Reg, ...]
    init: Tuple[Operand, ...]
    body: List["Node"]
    afters: Dict[int, Tuple[Tuple[Reg, ...], List["Node"]]] = field(default_factory=dict)


Node = Union[Op, IfNode, LoopNode]


@dataclass(eq=False)
class TraceIR:
    kind: str  # "trace" | "method"
    key: int  # loop-head pc (trace) or function entry pc (method)
    inputs: Tuple[Reg, ...]
    body: List[Node]
    name: str = ""
    nregs: int = 0

    def guards(self) -> List[Op]:
        return [op for op in walk(self.body) if isinstance(op, Op) and op.snapshot is not None]

    def count(self, predicate) -> int:
        return sum(1 for n in walk(self.body) if predicate(n))


def walk(body: Sequence[Node]) -> Iterator[Node]:
    for node in body:
        yield node
        if isinstance(node, IfNode):
            yield from walk(node.then)
            yield from walk(node.orelse)
        elif isinstance(node, LoopNode):
            yield from walk(node.body)
            for _, after in node.afters.values():
                yield from walk(after)


def number_guards(ir: TraceIR) -> TraceIR:
    for i, op in enumerate(ir.guards()):
        op.gid = i
    return ir


class MalformedTrace(Exception):
    """A TraceIR violates a structural rule; always a compiler bug."""


def verify(ir: TraceIR) -> None:
    """Single-pass structural checks: arity, write-before-read, terminal shape."""

    def use(x, defined, where):
        if isinstance(x, Reg) and x not in defined:
            raise MalformedTrace(f"{x} read before written in {where}")

    def check(body, defined, in_loop):
        defined = set(defined)
        for i, node in enumerate(body):
            last = i == len(body) - 1
            if isinstance(node, IfNode):
                use(node.cond, defined, "if")
                if ir.kind != "method":
                    raise MalformedTrace("if node in a trace-strategy unit")
                check(node.then, defined, in_loop)
                check(node.orelse, defined, in_loop)
                if not last:
                    raise MalformedTrace("if node must end its segment")
                return
            if isinstance(node, LoopNode):
                if ir.kind != "method":
                    raise MalformedTrace("loop node in a trace-strategy unit")
                for x in node.init:
                    use(x, defined, "loop init")
                check(node.body, defined | set(node.params), True)
                for params, after in node.afters.values():
                    check(after, defined | set(params), in_loop)
                if not last:
                    raise MalformedTrace("loop node must end its segment")
                return
            sig = SIGNATURES.get(node.name)
            if sig is None:
                raise MalformedTrace(f"unknown op {node.name}")
            if (len(node.dst), len(node.args)) != sig:
                raise MalformedTrace(f"bad arity for {node}")
            for x in node.args:
                use(x, defined, node.name)
            if node.name in ("guard", "guard_value"):
                if ir.kind != "trace":
                    raise MalformedTrace("guard in a method-strategy unit")
                if node.snapshot is None:
                    raise MalformedTrace("guard without deopt snapshot")
                for r in node.snapshot.registers():
                    use(r, defined, "snapshot")
            if node.name in ("jump_loop", "jump_after") and not in_loop:
                raise MalformedTrace(f"{node.name} outside a loop body")
            if node.name == "jump" and ir.kind != "trace":
                raise MalformedTrace("jump in a method-strategy unit")
            defined.update(node.dst)
            if node.name in TERMINAL:
                if not last:
                    raise MalformedTrace(f"{node.name} is not the last op of its segment")
                return
        raise MalformedTrace("segment falls off its end")

    check(ir.body, set(ir.inputs), False)


def render(ir: TraceIR) -> str:
    """Stable textual listing; nested arms are indented."""
    lines = [f"{ir.kind} {ir.name}@{ir.key}({', '.join(map(str, ir.inputs))})"]

    def emit(body, depth):
        pad = "  " * depth
        for node in body:
            if isinstance(node, IfNode):
                lines.append(f"{pad}if {node.cond}  ; {node.kind}")
                lines.append(f"{pad}then:")
                emit(node.then, depth + 1)
                lines.append(f"{pad}else:")
                emit(node.orelse, depth + 1)
            elif isinstance(node, LoopNode):
                init = ", ".join(f"{p}={v}" for p, v in zip(node.params, node.init))
                lines.append(f"{pad}loop @{node.entry_pc} ({init})")
                lines.append(f"{pad}body:")
                emit(node.body, depth + 1)
                for pc in sorted(node.afters):
                    params, after = node.afters[pc]
                    lines.append(f"{pad}after @{pc} ({', '.join(map(str, params))}):")
                    emit(after, depth + 1)
            else:
                lines.append(pad + str(node))

    emit(ir.body, 1)
    return "\n".join(lines) + "\n"
