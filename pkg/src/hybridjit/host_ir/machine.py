"""Plain execution of host IR.

Each host function is translated once into a Python function (blocks with a
single predecessor are nested in place, the rest become labels of a
``while`` state machine), much like translating an interpreter definition to
a lower-level language ahead of time. Hints are no-ops unless a hook object is
attached, in which case the machine reports merge points, ``can_enter_jit``
transfers and host-stack calls of the dispatch function to it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

from .. import _deep
from ..base_language.bytecode import BytecodeProgram
from .ir import HS, US, Const, Flag, HostFunction, HostInstr, HostProgram, RetAddr

DEFAULT_STACK_CAPACITY = 1 << 20
DEFAULT_HOST_DEPTH = 10_000

_PY_BINOP = {"iadd": "+", "isub": "-", "imul": "*", "icmp_le": "<=", "icmp_lt": "<", "icmp_eq": "=="}


class HostError(Exception):
    """Raised for interpreter-definition faults (never for base-program errors)."""


class UserStackUnderflow(HostError):
    pass


class UserStackOverflow(HostError):
    pass


class InvalidPc(HostError):
    pass


class HostRecursionLimit(HostError):
    pass


class HostFailure(HostError):
    """A ``fail`` instruction of the interpreter definition was reached."""


@dataclass
class HostReturn:
    """Returned by a merge hook to make the current dispatch activation return."""

    value: object


class Hooks:
    """Base class for runtime hooks; the defaults do nothing."""

    def __init__(self):
        self.watch = set()

    def on_merge(self, pc, stack, sp, fp, depth):
        return None

    def on_can_enter(self, pc, stack, sp, fp):
        return None

    def hs_call(self, machine, pc, stack, sp, fp, depth):
        return machine.dispatch(pc, stack, sp, fp, depth)


class Counters:
    """Execution counters shared by every executor of one run."""

    __slots__ = ("steps", "flag_pushes", "flag_reads", "last_sp", "trace_iters")

    def __init__(self):
        self.steps = 0
        self.flag_pushes = 0
        self.flag_reads = 0
        self.last_sp = None
        self.trace_iters = 0


def _ck(idx):
    raise UserStackUnderflow(f"user stack index {idx} below zero")


class _FunctionGen:
    def __init__(self, fn: HostFunction, program: HostProgram, opts):
        self.fn = fn
        self.program = program
        self.opts = opts
        self.lines: List[str] = []
        preds: Dict[str, int] = {b: 0 for b in fn.blocks}
        for instrs in fn.blocks.values():
            for t in instrs[-1].targets:
                preds[t] += 1
        self.labels = [fn.entry] + [b for b in fn.blocks if b != fn.entry and preds[b] != 1]
        self.label_index = {b: i for i, b in enumerate(self.labels)}

    def v(self, x) -> str:
        if isinstance(x, Const):
            val = x.value
            if val is HS:
                return "HS"
            if val is US:
                return "US"
            return repr(val)
        return "v_" + x

    def emit(self, depth: int, text: str):
        self.lines.append("    " * depth + text)

    def goto(self, target: str, d: int):
        if target in self.label_index:
            self.emit(d, f"_b = {self.label_index[target]}")
            self.emit(d, "continue")
        else:
            self.block(target, d)

    def block(self, name: str, d: int):
        for ins in self.fn.blocks[name]:
            self.instr(ins, d)

    def instr(self, ins: HostInstr, d: int):
        op, v = ins.op, self.v
        a = [v(x) for x in ins.args]
        dst = "v_" + ins.dst if ins.dst else None
        if op in _PY_BINOP:
            self.emit(d, f"{dst} = {a[0]} {_PY_BINOP[op]} {a[1]}")
        elif op in ("move", "const"):
            self.emit(d, f"{dst} = {a[0]}")
        elif op == "new_retaddr":
            self.emit(d, f"{dst} = RetAddr({a[0]}, {a[1]})")
        elif op == "retaddr_pc":
            self.emit(d, f"{dst} = {a[0]}.pc")
        elif op == "retaddr_fp":
            self.emit(d, f"{dst} = {a[0]}.fp")
        elif op == "array_read":
            if ins.args[0] != "bytecode":
                self.emit(d, f"if {a[1]} < 0: _ck({a[1]})")
            self.emit(d, f"{dst} = {a[0]}[{a[1]}]")
            if self.opts["instrument"] and ins.args[0] != "bytecode":
                self.emit(d, f"if {dst}.__class__ is Flag: _ctr.flag_reads += 1")
        elif op == "array_write":
            self.emit(d, f"if {a[1]} < 0: _ck({a[1]})")
            self.emit(d, f"{a[0]}[{a[1]}] = {a[2]}")
            if self.opts["instrument"] and isinstance(ins.args[2], Const) and isinstance(ins.args[2].value, Flag):
                self.emit(d, "_ctr.flag_pushes += 1")
        elif op == "print":
            self.emit(d, f"_out.append(int({a[0]}))")
        elif op == "probe":
            pass
        elif op == "is_mj":
            self.emit(d, f"{dst} = {self.opts['is_mj']!r}")
        elif op == "jit_merge_point":
            self.emit(d, "if not 0 <= v_pc < _NPC: _bad_pc(v_pc)")
            if self.opts["count"]:
                self.emit(d, "_ctr.steps += 1")
            if self.opts["hooks"]:
                self.emit(d, "if v_pc in _watch:")
                self.emit(d + 1, "_r = _hooks.on_merge(v_pc, v_stack, v_sp, v_fp, _depth)")
                self.emit(d + 1, "if _r is not None:")
                self.emit(d + 2, "if _r.__class__ is HostReturn: return _r.value")
                self.emit(d + 2, "v_pc, v_sp, v_fp = _r")
                self.emit(d + 2, "if not 0 <= v_pc < _NPC: _bad_pc(v_pc)")
        elif op == "can_enter_jit":
            if self.opts["hooks"]:
                self.emit(d, "_hooks.on_can_enter(v_pc, v_stack, v_sp, v_fp)")
        elif op == "call":
            target = ins.fn
            if target == self.program.dispatch:
                if self.opts["hooks"]:
                    call = f"_hooks.hs_call(_machine, {a[1]}, {a[2]}, {a[3]}, {a[4]}, _depth + 1)"
                else:
                    call = f"_dispatch({', '.join(a)}, _depth + 1)"
            else:
                call = f"f_{target}({', '.join(a)})"
            self.emit(d, f"{dst or '_'} = {call}")
        elif op == "branch":
            self.emit(d, f"if {a[0]}:")
            self.goto(ins.targets[0], d + 1)
            self.emit(d, "else:")
            self.goto(ins.targets[1], d + 1)
        elif op == "jump":
            self.goto(ins.targets[0], d)
        elif op == "ret":
            if self.opts["instrument"] and self.fn.name == self.program.dispatch:
                self.emit(d, "_ctr.last_sp = v_sp")
            self.emit(d, f"return {a[0]}")
        elif op == "fail":
            self.emit(d, f"raise HostFailure({ins.note!r})")
        else:
            raise HostError(f"unknown host op {op}")

    def generate(self) -> str:
        fn = self.fn
        params = ", ".join("v_" + p for p in fn.params)
        is_dispatch = fn.name == self.program.dispatch
        extra = ", _depth" if is_dispatch else ""
        self.emit(0, f"def f_{fn.name}({params}{extra}):")
        if is_dispatch:
            self.emit(1, "if _depth > _MAXDEPTH: _too_deep(_depth)")
        self.emit(1, "_b = 0")
        self.emit(1, "while True:")
        for i, label in enumerate(self.labels):
            self.emit(2, f"{'if' if i == 0 else 'elif'} _b == {i}:")
            self.block(label, 3)
        return "\n".join(self.lines)


class Machine:
    """One execution of a host program over one bytecode program."""

    def __init__(self, program: HostProgram, bytecode: BytecodeProgram, *, is_mj: bool = False,
                 hooks: Optional[Hooks] = None, stack_capacity: int = DEFAULT_STACK_CAPACITY,
                 max_host_depth: int = DEFAULT_HOST_DEPTH, instrument: bool = False,
                 count_steps: bool = False, counters: Optional[Counters] = None,
                 stack: Optional[list] = None, output: Optional[list] = None):
        self.program = program
        self.bytecode = bytecode
        self.hooks = hooks
        self.output: List[int] = output if output is not None else []
        self.counters = counters if counters is not None else Counters()
        self.stack: List[object] = stack if stack is not None else [0] * stack_capacity
        self.max_host_depth = max_host_depth
        opts = {"is_mj": bool(is_mj), "hooks": hooks is not None, "instrument": instrument,
                "count": count_steps or instrument}
        npc = len(bytecode.instructions)

        def bad_pc(pc):
            raise InvalidPc(f"pc {pc} outside bytecode [0, {npc})")

        def too_deep(depth):
            raise HostRecursionLimit(f"host-stack recursion exceeded {max_host_depth} activations")

        ns = {"HS": HS, "US": US, "Flag": Flag, "RetAddr": RetAddr, "HostReturn": HostReturn,
              "HostFailure": HostFailure, "_ck": _ck, "_bad_pc": bad_pc, "_too_deep": too_deep,
              "_NPC": npc, "_MAXDEPTH": max_host_depth, "_out": self.output, "_ctr": self.counters,
              "_hooks": hooks, "_watch": hooks.watch if hooks is not None else set(), "_machine": self}
        src = "\n\n".join(_FunctionGen(f, program, opts).generate() for f in program.functions.values())
        self.source = src
        exec(compile(src, f"<host:{id(self)}>", "exec"), ns)
        self._dispatch = ns[f"f_{program.dispatch}"]
        ns["_dispatch"] = self._dispatch

    def dispatch(self, pc: int, stack, sp: int, fp: int, depth: int = 0):
        """Run the dispatch function from an arbitrary interpreter state."""
        return self._dispatch(self.bytecode.code, pc, stack, sp, fp, depth)

    def _guarded(self, fn, *args):
        try:
            return fn(*args)
        except IndexError as exc:
            raise UserStackOverflow(f"user stack overflow ({len(self.stack)} slots)") from exc
        except RecursionError as exc:
            raise HostRecursionLimit("host recursion exhausted the Python stack") from exc

    def run(self) -> List[int]:
        entry = self.bytecode.entry
        _deep.run_deep(self._guarded, self.dispatch, entry, self.stack, 0, 0, 0)
        return self.output

    def flags_on_stack(self, sp: int) -> int:
        return sum(1 for s in self.stack[:sp] if isinstance(s, Flag))


def execute_host(program: HostProgram, bytecode: BytecodeProgram, *, is_mj: bool = False,
                 **kwargs) -> List[int]:
    """Interpreter-only execution; returns the printed integers."""
    return Machine(program, bytecode, is_mj=is_mj, **kwargs).run()
