"""Host IR, the shipped bytecode interpreter written in it, and its plain executor."""

from .interpreter import DISPATCH_PARAMS, GREENS, REDS, build_interpreter
from .ir import (HS, US, Const, Flag, FunctionBuilder, HostFunction, HostInstr, HostProgram,
                 RetAddr, dump, iter_instrs)
from .machine import (Counters, HostError, HostFailure, HostRecursionLimit, HostReturn, Hooks, InvalidPc,
                      Machine, UserStackOverflow, UserStackUnderflow, execute_host)
from .validate import validate_interpreter

__all__ = [
    "DISPATCH_PARAMS", "GREENS", "REDS", "build_interpreter", "HS", "US", "Const", "Flag",
    "FunctionBuilder", "HostFunction", "HostInstr", "HostProgram", "RetAddr", "dump", "iter_instrs",
    "HostError", "HostFailure", "HostRecursionLimit", "HostReturn", "Hooks", "InvalidPc", "Counters", "Machine",
    "UserStackOverflow", "UserStackUnderflow", "execute_host", "validate_interpreter",
]
