"""Semantics of the pure host operations, shared by every host-IR evaluator."""

import operator

from .ir import RetAddr

PURE = {
    "iadd": operator.add,
    "isub": operator.sub,
    "imul": operator.mul,
    "icmp_le": operator.le,
    "icmp_lt": operator.lt,
    "icmp_eq": operator.eq,
    "move": lambda x: x,
    "new_retaddr": RetAddr,
    "retaddr_pc": lambda ra: ra.pc,
    "retaddr_fp": lambda ra: ra.fp,
}

# host op -> TraceIR op emitted when an operand is red
RESIDUE_NAME = {
    "iadd": "add", "isub": "sub", "imul": "mul",
    "icmp_le": "le", "icmp_lt": "lt", "icmp_eq": "eq",
    "new_retaddr": "new_retaddr", "retaddr_pc": "retaddr_pc", "retaddr_fp": "retaddr_fp",
}


def apply_pure(op: str, args):
    return PURE[op](*args)
