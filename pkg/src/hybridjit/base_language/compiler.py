"""AST to stack-bytecode compiler.

Frame layout seen by compiled code: parameters occupy frame slots
``0..arity-1``; every ``let`` binds the slot at the current operand-stack
depth, so locals need no separate allocation. ``let x = e1 in e2`` compiles
to ``e1; e2; STORE slot(x)`` which drops ``x`` and leaves the body value.
Functions are laid out first, top-level code last.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import ast as A
from .bytecode import BytecodeProgram, FunctionInfo, Instruction, Op

_BINOP = {"+": Op.ADD, "-": Op.SUB, "*": Op.MUL, "<": Op.LT, "<=": Op.LE, "=": Op.EQ}


class CompileError(Exception):
    def __init__(self, message: str, pos: A.Pos = A.NOPOS):
        self.pos = pos
        super().__init__(f"{pos}: {message}")


@dataclass
class _Func:
    name: str
    params: Tuple[str, ...]
    body: A.Node
    funcs: Dict[str, "_Func"]  # functions visible from the body
    code: List[list] = field(default_factory=list)
    entry: int = -1


class _Emitter:
    def __init__(self):
        self.code: List[list] = []  # [op, a, b]; a may be a label or a _Func until patched

    def emit(self, op: Op, a=0, b=0) -> list:
        ins = [op, a, b]
        self.code.append(ins)
        return ins

    def here(self) -> int:
        return len(self.code)


class Compiler:
    def __init__(self):
        self.funcs: List[_Func] = []
        self._names: Dict[str, int] = {}

    def _unique(self, name: str) -> str:
        n = self._names.get(name, 0) + 1
        self._names[name] = n
        return name if n == 1 else f"{name}#{n}"

    # function collection (let rec bodies are hoisted; they have no free values)
    def _declare(self, node: A.LetRec, visible: Dict[str, _Func]) -> _Func:
        f = _Func(self._unique(node.name), node.params, node.fbody, {})
        f.funcs = dict(visible)
        f.funcs[node.name] = f
        self.funcs.append(f)
        return f

    def compile_expr(self, em: _Emitter, node: A.Node, env: Dict[str, int], depth: int,
                     funcs: Dict[str, _Func], want: bool) -> None:
        """Emit code for ``node``; pushes exactly one value iff ``want``."""
        if isinstance(node, (A.Int, A.Bool, A.Unit)):
            if want:
                v = int(node.value) if not isinstance(node, A.Unit) else 0
                em.emit(Op.CONST, v)
        elif isinstance(node, A.Var):
            if node.name not in env:
                raise CompileError(f"unbound variable {node.name!r}", node.pos)
            if want:
                em.emit(Op.LOAD, env[node.name])
        elif isinstance(node, A.BinOp):
            self.compile_expr(em, node.left, env, depth, funcs, True)
            self.compile_expr(em, node.right, env, depth + 1, funcs, True)
            em.emit(_BINOP[node.op])
            if not want:
                em.emit(Op.POP)
        elif isinstance(node, A.If):
            self.compile_expr(em, node.cond, env, depth, funcs, True)
            jif = em.emit(Op.JUMP_IF)
            self.compile_expr(em, node.then, env, depth, funcs, want)
            jmp = em.emit(Op.JUMP)
            jif[1] = em.here()
            self.compile_expr(em, node.orelse, env, depth, funcs, want)
            jmp[1] = em.here()
        elif isinstance(node, A.Let):
            self.compile_expr(em, node.value, env, depth, funcs, True)
            inner = dict(env)
            if node.name is not None:
                inner[node.name] = depth
            self.compile_expr(em, node.body, inner, depth + 1, funcs, want)
            em.emit(Op.STORE, depth) if want else em.emit(Op.POP)
        elif isinstance(node, A.LetRec):
            f = self._declare(node, funcs)
            inner = dict(funcs)
            inner[node.name] = f
            self.compile_expr(em, node.body, env, depth, inner, want)
        elif isinstance(node, A.App):
            f = funcs.get(node.func)
            if f is None:
                raise CompileError(f"unknown function {node.func!r}", node.pos)
            if len(node.args) != len(f.params):
                raise CompileError(
                    f"{node.func} expects {len(f.params)} argument(s), got {len(node.args)}", node.pos)
            for i, arg in enumerate(node.args):
                self.compile_expr(em, arg, env, depth + i, funcs, True)
            em.emit(Op.CALL, f, len(node.args))
            if not want:
                em.emit(Op.POP)
        elif isinstance(node, A.Print):
            self.compile_expr(em, node.arg, env, depth, funcs, True)
            em.emit(Op.PRINT)
            if want:
                em.emit(Op.CONST, 0)
        elif isinstance(node, A.Seq):
            self.compile_expr(em, node.first, env, depth, funcs, False)
            self.compile_expr(em, node.second, env, depth, funcs, want)
        else:
            raise CompileError(f"unsupported construct {type(node).__name__}")

    def compile_program(self, root: A.Node) -> BytecodeProgram:
        main = _Emitter()
        self.compile_expr(main, root, {}, 0, {}, False)
        main.emit(Op.HALT)
        # function bodies may declare further nested functions; drain the queue
        done = 0
        while done < len(self.funcs):
            f = self.funcs[done]
            em = _Emitter()
            env = {p: i for i, p in enumerate(f.params)}
            self.compile_expr(em, f.body, env, len(f.params), f.funcs, True)
            em.emit(Op.RETURN)
            f.code = em.code
            done += 1

        layout: List[Tuple[Optional[_Func], List[list]]] = [(f, f.code) for f in self.funcs]
        layout.append((None, main.code))
        offset = 0
        main_entry = 0
        for f, code in layout:
            if f is None:
                main_entry = offset
            else:
                f.entry = offset
            for ins in code:
                if ins[0] in (Op.JUMP, Op.JUMP_IF):
                    ins[1] += offset
            offset += len(code)
        instructions = []
        for _, code in layout:
            for op, a, b in code:
                if op is Op.CALL:
                    a = a.entry
                instructions.append(Instruction(op, a, b))
        table = tuple(FunctionInfo(f.name, f.entry, len(f.params)) for f in self.funcs)
        prog = BytecodeProgram(tuple(instructions), table, main_entry)
        prog.validate()
        return prog


def compile_ast(ast: A.Node) -> BytecodeProgram:
    """Compile a well-bound AST to a bytecode program."""
    return Compiler().compile_program(ast)
