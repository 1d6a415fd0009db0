"""MinCaml-- front end: parser, bytecode compiler, reference evaluator."""

from .ast import Node
from .bytecode import (BytecodeError, BytecodeProgram, FunctionInfo, Instruction, Op,
                       assemble, disassemble, stack_heights)
from .compiler import CompileError, compile_ast
from .parser import MinCamlError, ParseError, UnboundVariableError, parse
from .reference import RecursionDepthExceeded, reference_run, run_reference

compile = compile_ast  # noqa: A001  (module-level name mirrors the operation)


def compile_source(source: str) -> BytecodeProgram:
    return compile_ast(parse(source))
