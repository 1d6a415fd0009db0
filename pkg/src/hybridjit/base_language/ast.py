"""AST for the MinCaml-- subset: unit, bool and int values, first-order
recursive functions, no closures."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOPOS = Pos(0, 0)


@dataclass(frozen=True)
class Node:
    pass


@dataclass(frozen=True)
class Int(Node):
    value: int
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Bool(Node):
    value: bool
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Unit(Node):
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Var(Node):
    name: str
    pos: Pos = field(default=NOPOS, compare=False)


BINOPS = ("+", "-", "*", "<=", "<", "=")


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class If(Node):
    cond: Node
    then: Node
    orelse: Node
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Let(Node):
    # name is None for `let _ = ...`
    name: Optional[str]
    value: Node
    body: Node
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class LetRec(Node):
    name: str
    params: Tuple[str, ...]
    fbody: Node
    body: Node
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class App(Node):
    func: str
    args: Tuple[Node, ...]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Print(Node):
    arg: Node
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Seq(Node):
    first: Node
    second: Node
    pos: Pos = field(default=NOPOS, compare=False)


def iter_letrecs(node: Node):
    """Yield every LetRec in the tree (pre-order)."""
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, LetRec):
            yield n
            stack.extend([n.body, n.fbody])
        elif isinstance(n, BinOp):
            stack.extend([n.right, n.left])
        elif isinstance(n, If):
            stack.extend([n.orelse, n.then, n.cond])
        elif isinstance(n, Let):
            stack.extend([n.body, n.value])
        elif isinstance(n, App):
            stack.extend(reversed(n.args))
        elif isinstance(n, Print):
            stack.append(n.arg)
        elif isinstance(n, Seq):
            stack.extend([n.second, n.first])
