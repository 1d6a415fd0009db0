"""The shipped bytecode interpreter, written in host IR in Stack-Hybridization style.

User-stack frame layout (``fp`` points at the first argument)::

    user-stack protocol:  ... | RetAddr(pc+1, caller fp) | US | arg0 .. argN-1 | locals/operands
    host-stack protocol:  ... | HS | arg0 .. argN-1 | locals/operands

so the flag always sits at ``fp - 1``. CALL receives its arguments already
pushed by the caller and slides them up to make room for the frame header.
RETURN reads the flag and either returns from the dispatch function (HS) or
restores ``pc``/``fp`` from the RetAddr slot (US). Handlers other than
CALL/RETURN follow the plain dispatch-loop shape.
"""

from __future__ import annotations

from ..base_language.bytecode import Op
from .ir import HS, US, FunctionBuilder, HostProgram

GREENS = ("bytecode", "pc")
REDS = ("stack", "sp", "fp")
DISPATCH_PARAMS = ("bytecode", "pc", "stack", "sp", "fp")

# dispatch order of the compare chain, most frequent first
_DISPATCH_ORDER = (Op.LOAD, Op.CONST, Op.ADD, Op.SUB, Op.LE, Op.JUMP_IF, Op.CALL, Op.RETURN,
                   Op.JUMP, Op.STORE, Op.LT, Op.EQ, Op.MUL, Op.POP, Op.DUP, Op.PRINT, Op.HALT)

_ARITH = {Op.ADD: "iadd", Op.SUB: "isub", Op.MUL: "imul",
          Op.LT: "icmp_lt", Op.LE: "icmp_le", Op.EQ: "icmp_eq"}


def _next(b: FunctionBuilder):
    b.emit("iadd", "pc", "pc", 1)
    b.jump("loop")


def _transfer(b: FunctionBuilder, handler: str, target: str):
    """Set pc to ``target``; backward transfers (``target <= pc``) pass through can_enter_jit."""
    b.emit("icmp_le", "back", target, "pc")
    b.branch("back", f"{handler}.back", f"{handler}.fwd")
    b.block(f"{handler}.back")
    b.move("pc", target)
    b.emit("can_enter_jit", greens=GREENS, reds=REDS)
    b.jump("loop")
    b.block(f"{handler}.fwd")
    b.move("pc", target)
    b.jump("loop")


def _build_shift_args():
    # shift_args(stack, base, n, by): move stack[base:base+n] up by `by` slots
    b = FunctionBuilder("shift_args", ("stack", "base", "n", "by"))
    b.block("entry")
    b.move("i", "n")
    b.jump("head")
    b.block("head")
    b.emit("icmp_lt", "more", 0, "i")
    b.branch("more", "body", "done")
    b.block("body")
    b.emit("isub", "i", "i", 1)
    b.emit("iadd", "src", "base", "i")
    b.emit("array_read", "v", "stack", "src")
    b.emit("iadd", "dst", "src", "by")
    b.emit("array_write", None, "stack", "dst", "v")
    b.jump("head")
    b.block("done")
    b.ret(0)
    return b.build()


def _build_dispatch():
    b = FunctionBuilder("interp", DISPATCH_PARAMS)
    b.block("loop")
    b.emit("jit_merge_point", greens=GREENS, reds=REDS)
    b.emit("imul", "i3", "pc", 3)
    b.emit("array_read", "opcode", "bytecode", "i3")
    b.emit("iadd", "ia", "i3", 1)
    b.emit("array_read", "arg", "bytecode", "ia")
    for k, op in enumerate(_DISPATCH_ORDER):
        if k:
            b.block(f"dispatch.{k}")
        b.emit("icmp_eq", "is_op", "opcode", int(op))
        b.branch("is_op", op.name, f"dispatch.{k + 1}")
    b.block(f"dispatch.{len(_DISPATCH_ORDER)}")
    b.fail("invalid opcode")

    b.block("LOAD")
    b.emit("iadd", "idx", "fp", "arg")
    b.emit("array_read", "v", "stack", "idx")
    b.emit("array_write", None, "stack", "sp", "v")
    b.emit("iadd", "sp", "sp", 1)
    _next(b)

    b.block("CONST")
    b.emit("array_write", None, "stack", "sp", "arg")
    b.emit("iadd", "sp", "sp", 1)
    _next(b)

    b.block("STORE")
    b.emit("isub", "sp", "sp", 1)
    b.emit("array_read", "v", "stack", "sp")
    b.emit("iadd", "idx", "fp", "arg")
    b.emit("array_write", None, "stack", "idx", "v")
    _next(b)

    for op, hop in _ARITH.items():
        b.block(op.name)
        b.emit("isub", "sp", "sp", 1)
        b.emit("array_read", "y", "stack", "sp")
        b.emit("isub", "top", "sp", 1)
        b.emit("array_read", "x", "stack", "top")
        b.emit(hop, "v", "x", "y")
        b.emit("array_write", None, "stack", "top", "v")
        _next(b)

    b.block("JUMP")
    _transfer(b, "JUMP", "arg")

    b.block("JUMP_IF")
    b.emit("isub", "sp", "sp", 1)
    b.emit("array_read", "v", "stack", "sp")
    b.branch("v", "JUMP_IF.fall", "JUMP_IF.taken", note="base-program conditional")
    b.block("JUMP_IF.fall")
    _next(b)
    b.block("JUMP_IF.taken")
    _transfer(b, "JUMP_IF.taken", "arg")

    b.block("CALL")
    b.emit("iadd", "ib", "i3", 2)
    b.emit("array_read", "arity", "bytecode", "ib")
    b.emit("isub", "base", "sp", "arity")
    b.emit("is_mj", "mj")
    b.branch("mj", "CALL.hs", "CALL.us", note="is_mj: method-compilation context")
    # host-stack protocol
    b.block("CALL.hs")
    b.call("_", "shift_args", "stack", "base", "arity", 1)
    b.emit("array_write", None, "stack", "base", HS)
    b.emit("iadd", "nfp", "base", 1)
    b.emit("iadd", "nsp", "nfp", "arity")
    b.call("ret_val", "interp", "bytecode", "arg", "stack", "nsp", "nfp")
    b.emit("array_write", None, "stack", "base", "ret_val")
    b.emit("iadd", "sp", "base", 1)
    _next(b)
    # user-stack protocol
    b.block("CALL.us")
    b.call("_", "shift_args", "stack", "base", "arity", 2)
    b.emit("iadd", "npc", "pc", 1)
    b.emit("new_retaddr", "ra", "npc", "fp")
    b.emit("array_write", None, "stack", "base", "ra")
    b.emit("iadd", "fi", "base", 1)
    b.emit("array_write", None, "stack", "fi", US)
    b.emit("iadd", "fp", "base", 2)
    b.emit("iadd", "sp", "fp", "arity")
    _transfer(b, "CALL.us", "arg")

    b.block("RETURN")
    b.emit("isub", "sp", "sp", 1)
    b.emit("array_read", "ret_val", "stack", "sp")
    b.emit("isub", "fi", "fp", 1)
    b.emit("array_read", "jit_flg", "stack", "fi")
    b.emit("icmp_eq", "is_hs", "jit_flg", HS)
    b.branch("is_hs", "RETURN.hs", "RETURN.us", note="calling-protocol flag")
    b.block("RETURN.hs")
    b.ret("ret_val")
    b.block("RETURN.us")
    b.emit("icmp_eq", "is_us", "jit_flg", US)
    b.branch("is_us", "RETURN.us_ok", "RETURN.bad")
    b.block("RETURN.bad")
    b.fail("flag mismatch at RETURN")
    b.block("RETURN.us_ok")
    b.emit("isub", "ri", "fp", 2)
    b.emit("array_read", "ra", "stack", "ri")
    b.emit("array_write", None, "stack", "ri", "ret_val")
    b.move("sp", "fi")
    b.emit("retaddr_pc", "npc", "ra")
    b.emit("retaddr_fp", "fp", "ra")
    _transfer(b, "RETURN.us_ok", "npc")

    b.block("POP")
    b.emit("isub", "sp", "sp", 1)
    _next(b)

    b.block("DUP")
    b.emit("isub", "top", "sp", 1)
    b.emit("array_read", "v", "stack", "top")
    b.emit("array_write", None, "stack", "sp", "v")
    b.emit("iadd", "sp", "sp", 1)
    _next(b)

    b.block("PRINT")
    b.emit("isub", "sp", "sp", 1)
    b.emit("array_read", "v", "stack", "sp")
    b.emit("print", None, "v")
    _next(b)

    b.block("HALT")
    b.ret(0)
    return b.build()


def build_interpreter() -> HostProgram:
    """Return the shipped interpreter definition."""
    return HostProgram({"interp": _build_dispatch(), "shift_args": _build_shift_args()}, "interp")
