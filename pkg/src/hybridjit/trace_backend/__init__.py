"""TraceIR, its translation to executable units, constant folding, and the unit registry."""

from .codegen import compile_ir, generate_source
from .executor import (CompiledUnit, GuardFail, JumpOut, Registry, Returned, build_unit,
                       decode_exit, execute_unit)
from .fold import fold_constants
from .interp import interpret_ir
from .ir import (DeoptSnapshot, FrameSnapshot, IfNode, Imm, LoopNode, MalformedTrace, Op, Reg,
                 TraceIR, number_guards, render, verify, walk)

__all__ = [
    "compile_ir", "generate_source", "CompiledUnit", "GuardFail", "JumpOut", "Registry", "Returned",
    "build_unit", "decode_exit", "execute_unit", "fold_constants", "interpret_ir", "DeoptSnapshot",
    "FrameSnapshot", "IfNode", "Imm", "LoopNode", "MalformedTrace", "Op", "Reg", "TraceIR",
    "number_guards", "render", "verify", "walk",
]
