"""Stack bytecode: instruction set, program container, assembler and disassembler."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple


class Op(enum.IntEnum):
    CONST = 0
    LOAD = 1
    STORE = 2
    ADD = 3
    SUB = 4
    MUL = 5
    LT = 6
    LE = 7
    EQ = 8
    JUMP = 9
    JUMP_IF = 10  # pops a condition, jumps when it is false (then-branch falls through)
    CALL = 11
    RETURN = 12
    POP = 13
    DUP = 14
    PRINT = 15
    HALT = 16


# number of operands per opcode
OPERANDS = {Op.CONST: 1, Op.LOAD: 1, Op.STORE: 1, Op.JUMP: 1, Op.JUMP_IF: 1, Op.CALL: 2}

# (pops, pushes) for everything except CALL, whose pops equal its arity
STACK_EFFECT = {
    Op.CONST: (0, 1), Op.LOAD: (0, 1), Op.STORE: (1, 0),
    Op.ADD: (2, 1), Op.SUB: (2, 1), Op.MUL: (2, 1),
    Op.LT: (2, 1), Op.LE: (2, 1), Op.EQ: (2, 1),
    Op.JUMP: (0, 0), Op.JUMP_IF: (1, 0), Op.RETURN: (1, 0),
    Op.POP: (1, 0), Op.DUP: (1, 2), Op.PRINT: (1, 0), Op.HALT: (0, 0),
}


@dataclass(frozen=True)
class Instruction:
    op: Op
    a: int = 0
    b: int = 0

    def __str__(self) -> str:
        n = OPERANDS.get(self.op, 0)
        if n == 0:
            return self.op.name
        if n == 1:
            return f"{self.op.name} {self.a}"
        return f"{self.op.name} {self.a} {self.b}"


@dataclass(frozen=True)
class FunctionInfo:
    name: str
    entry: int
    arity: int


class BytecodeError(Exception):
    pass


@dataclass(frozen=True)
class BytecodeProgram:
    instructions: Tuple[Instruction, ...]
    functions: Tuple[FunctionInfo, ...] = ()
    entry: int = 0
    _flat: Tuple[int, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        flat = []
        for ins in self.instructions:
            flat.extend((int(ins.op), ins.a, ins.b))
        object.__setattr__(self, "_flat", tuple(flat))

    @property
    def code(self) -> Tuple[int, ...]:
        """Flat ``[op, a, b] * n`` encoding read by the host-level interpreter."""
        return self._flat

    def __len__(self) -> int:
        return len(self.instructions)

    def function(self, name: str) -> FunctionInfo:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def function_at(self, entry: int) -> Optional[FunctionInfo]:
        for f in self.functions:
            if f.entry == entry:
                return f
        return None

    def regions(self) -> List[Tuple[str, int, int]]:
        """Contiguous (name, start, end) code regions; top-level code is ``<main>``."""
        starts = sorted([(f.entry, f.name) for f in self.functions] + [(self.entry, "<main>")])
        out = []
        for i, (start, name) in enumerate(starts):
            end = starts[i + 1][0] if i + 1 < len(starts) else len(self.instructions)
            out.append((name, start, end))
        return out

    def region_of(self, pc: int) -> str:
        for name, start, end in self.regions():
            if start <= pc < end:
                return name
        raise BytecodeError(f"pc {pc} outside every region")

    def validate(self) -> None:
        n = len(self.instructions)
        if self.instructions and not 0 <= self.entry < n:
            raise BytecodeError(f"entry {self.entry} out of range")
        entries = {f.entry for f in self.functions}
        for f in self.functions:
            if not 0 <= f.entry < n:
                raise BytecodeError(f"function {f.name} entry {f.entry} out of range")
        for pc, ins in enumerate(self.instructions):
            if ins.op in (Op.JUMP, Op.JUMP_IF) and not 0 <= ins.a < n:
                raise BytecodeError(f"{pc}: jump target {ins.a} out of range")
            if ins.op is Op.CALL:
                if ins.a not in entries:
                    raise BytecodeError(f"{pc}: call target {ins.a} is not a function entry")
                f = self.function_at(ins.a)
                if f.arity != ins.b:
                    raise BytecodeError(f"{pc}: call to {f.name} with arity {ins.b}, expected {f.arity}")


def disassemble(program: BytecodeProgram) -> str:
    """Render a program as ``.mba`` assembly text, one instruction per line."""
    lines = []
    for f in program.functions:
        lines.append(f".func {f.name} {f.entry} {f.arity}")
    if program.entry != 0:
        lines.append(f".entry {program.entry}")
    for pc, ins in enumerate(program.instructions):
        text = f"{pc}: {ins}"
        if ins.op is Op.CALL:
            f = program.function_at(ins.a)
            if f is not None:
                text += f"  ; {f.name}"
        lines.append(text)
    return "\n".join(lines)


_LINE_RE = re.compile(r"^(\d+):\s*([A-Z_]+)((?:\s+-?\d+)*)\s*$")


def assemble(text: str) -> BytecodeProgram:
    """Parse ``.mba`` assembly (the disassembler's output format)."""
    instructions: List[Instruction] = []
    functions: List[FunctionInfo] = []
    entry = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith(".func"):
            parts = line.split()
            if len(parts) != 4:
                raise BytecodeError(f"line {lineno}: malformed .func")
            functions.append(FunctionInfo(parts[1], int(parts[2]), int(parts[3])))
            continue
        if line.startswith(".entry"):
            entry = int(line.split()[1])
            continue
        m = _LINE_RE.match(line)
        if m is None:
            raise BytecodeError(f"line {lineno}: cannot parse {raw!r}")
        addr, name, operands = int(m.group(1)), m.group(2), m.group(3).split()
        if addr != len(instructions):
            raise BytecodeError(f"line {lineno}: expected address {len(instructions)}, got {addr}")
        try:
            op = Op[name]
        except KeyError:
            raise BytecodeError(f"line {lineno}: unknown opcode {name}") from None
        if len(operands) != OPERANDS.get(op, 0):
            raise BytecodeError(f"line {lineno}: {name} takes {OPERANDS.get(op, 0)} operand(s)")
        vals = [int(x) for x in operands] + [0, 0]
        instructions.append(Instruction(op, vals[0], vals[1]))
    prog = BytecodeProgram(tuple(instructions), tuple(functions), entry)
    prog.validate()
    return prog


def stack_heights(program: BytecodeProgram, start: int, base: int = 0) -> Dict[int, int]:
    """Abstract interpretation of operand-stack height (relative to the frame
    pointer) from ``start``. Raises BytecodeError on inconsistent heights."""
    heights: Dict[int, int] = {}
    work = [(start, base)]
    n = len(program.instructions)
    while work:
        pc, h = work.pop()
        if pc in heights:
            if heights[pc] != h:
                raise BytecodeError(f"inconsistent stack height at {pc}: {heights[pc]} vs {h}")
            continue
        if not 0 <= pc < n:
            raise BytecodeError(f"control falls off the code at {pc}")
        heights[pc] = h
        ins = program.instructions[pc]
        if ins.op is Op.CALL:
            pops, pushes = ins.b, 1
        else:
            pops, pushes = STACK_EFFECT[ins.op]
        if h - pops < 0:
            raise BytecodeError(f"stack underflow at {pc}")
        nh = h - pops + pushes
        if ins.op in (Op.RETURN, Op.HALT):
            continue
        if ins.op is Op.JUMP:
            work.append((ins.a, nh))
            continue
        if ins.op is Op.JUMP_IF:
            work.append((ins.a, nh))
        work.append((pc + 1, nh))
    return heights


def backward_targets(program: BytecodeProgram, start: int, end: int) -> Dict[int, List[int]]:
    """Map each loop entry in [start, end) to the pcs of its backward JUMP/JUMP_IF."""
    loops: Dict[int, List[int]] = {}
    for pc in range(start, end):
        ins = program.instructions[pc]
        if ins.op in (Op.JUMP, Op.JUMP_IF) and start <= ins.a <= pc:
            loops.setdefault(ins.a, []).append(pc)
    return loops
