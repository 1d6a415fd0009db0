"""Host IR: the language the bytecode interpreter itself is written in.

A HostProgram is a set of functions, each a graph of named basic blocks.
Operands are variable names (``str``) or ``Const`` wrappers. Besides plain
integer/array operations the IR carries the JIT hint pseudo-instructions
``jit_merge_point``, ``can_enter_jit`` and ``is_mj``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union


class Flag:
    """Calling-protocol flag stored in a user-stack slot."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __reduce__(self):
        return (_flag, (self.name,))


US = Flag("US")
HS = Flag("HS")


def _flag(name):
    return US if name == "US" else HS


class RetAddr:
    """Return address slot of the user-stack calling protocol."""

    __slots__ = ("pc", "fp")

    def __init__(self, pc: int, fp: int):
        self.pc = pc
        self.fp = fp

    def __eq__(self, other):
        return isinstance(other, RetAddr) and other.pc == self.pc and other.fp == self.fp

    def __hash__(self):
        return hash((self.pc, self.fp))

    def __repr__(self) -> str:
        return f"RetAddr(pc={self.pc}, fp={self.fp})"


@dataclass(frozen=True)
class Const:
    value: object

    def __repr__(self) -> str:
        return f"${self.value!r}"


Operand = Union[str, Const]

PURE_BINOPS = ("iadd", "isub", "imul", "icmp_le", "icmp_lt", "icmp_eq")
PURE_OPS = PURE_BINOPS + ("move", "new_retaddr", "retaddr_pc", "retaddr_fp")
TERMINATORS = ("branch", "jump", "ret", "fail")
HINTS = ("jit_merge_point", "can_enter_jit", "is_mj")
ALL_OPS = PURE_OPS + ("const", "array_read", "array_write", "print", "probe", "call") + TERMINATORS + HINTS


@dataclass(frozen=True)
class HostInstr:
    op: str
    dst: Optional[str] = None
    args: Tuple[Operand, ...] = ()
    targets: Tuple[str, ...] = ()
    fn: Optional[str] = None
    greens: Tuple[str, ...] = ()
    reds: Tuple[str, ...] = ()
    note: str = ""

    def __str__(self) -> str:
        parts = []
        if self.dst is not None:
            parts.append(f"{self.dst} = ")
        parts.append(self.op)
        if self.fn:
            parts.append(f" {self.fn}")
        if self.args:
            parts.append(" " + ", ".join(repr(a) if isinstance(a, Const) else a for a in self.args))
        if self.targets:
            parts.append(" -> " + ", ".join(self.targets))
        if self.op in ("jit_merge_point", "can_enter_jit"):
            parts.append(f" greens=[{', '.join(self.greens)}] reds=[{', '.join(self.reds)}]")
        if self.note:
            parts.append(f"  # {self.note}")
        return "".join(parts)


@dataclass
class HostFunction:
    name: str
    params: Tuple[str, ...]
    blocks: Dict[str, Tuple[HostInstr, ...]]
    entry: str

    def variables(self) -> List[str]:
        seen = list(self.params)
        for instrs in self.blocks.values():
            for ins in instrs:
                names = [a for a in ins.args if isinstance(a, str)]
                if ins.dst is not None:
                    names.append(ins.dst)
                names.extend(ins.greens)
                names.extend(ins.reds)
                for n in names:
                    if n not in seen:
                        seen.append(n)
        return seen

    @staticmethod
    def handler_of(block: str) -> str:
        return block.split(".", 1)[0]


@dataclass
class HostProgram:
    functions: Dict[str, HostFunction]
    dispatch: str = "interp"

    @property
    def dispatch_function(self) -> HostFunction:
        return self.functions[self.dispatch]

    def replace_function(self, fn: HostFunction) -> "HostProgram":
        funcs = dict(self.functions)
        funcs[fn.name] = fn
        return HostProgram(funcs, self.dispatch)


class FunctionBuilder:
    """Small imperative builder used to write interpreter definitions."""

    def __init__(self, name: str, params: Sequence[str]):
        self.name = name
        self.params = tuple(params)
        self.blocks: Dict[str, List[HostInstr]] = {}
        self.entry: Optional[str] = None
        self.current: Optional[List[HostInstr]] = None

    def block(self, name: str) -> "FunctionBuilder":
        if name in self.blocks:
            raise ValueError(f"duplicate block {name}")
        self.blocks[name] = self.current = []
        if self.entry is None:
            self.entry = name
        return self

    @staticmethod
    def _operand(x) -> Operand:
        return x if isinstance(x, (str, Const)) else Const(x)

    def emit(self, op: str, dst: Optional[str] = None, *args, **kw) -> "FunctionBuilder":
        self.current.append(HostInstr(op, dst, tuple(self._operand(a) for a in args), **kw))
        return self

    def const(self, dst, value):
        return self.emit("const", dst, Const(value))

    def move(self, dst, src):
        return self.emit("move", dst, src)

    def branch(self, cond, then, orelse, note=""):
        return self.emit("branch", None, cond, targets=(then, orelse), note=note)

    def jump(self, target):
        return self.emit("jump", targets=(target,))

    def call(self, dst, fn, *args):
        return self.emit("call", dst, *args, fn=fn)

    def ret(self, value):
        return self.emit("ret", None, value)

    def fail(self, message):
        return self.emit("fail", note=message)

    def build(self) -> HostFunction:
        return HostFunction(self.name, self.params,
                            {k: tuple(v) for k, v in self.blocks.items()}, self.entry)


def dump(program: HostProgram) -> str:
    """Stable line-oriented listing of a host program."""
    lines = []
    for fname in sorted(program.functions, key=lambda n: (n != program.dispatch, n)):
        fn = program.functions[fname]
        mark = "  (dispatch)" if fname == program.dispatch else ""
        lines.append(f"function {fn.name}({', '.join(fn.params)}){mark}")
        for bname, instrs in fn.blocks.items():
            lines.append(f"  {bname}:")
            for ins in instrs:
                lines.append(f"    {ins}")
    return "\n".join(lines) + "\n"


def iter_instrs(fn: HostFunction) -> Iterator[Tuple[str, int, HostInstr]]:
    for bname, instrs in fn.blocks.items():
        for i, ins in enumerate(instrs):
            yield bname, i, ins
