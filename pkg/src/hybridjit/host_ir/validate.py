"""Static checks of the hint discipline of an interpreter definition."""

from __future__ import annotations

from typing import Dict, List, Set

from .ir import Const, HostFunction, HostProgram, iter_instrs


def _preds(fn: HostFunction) -> Dict[str, List[str]]:
    preds: Dict[str, List[str]] = {b: [] for b in fn.blocks}
    for name, instrs in fn.blocks.items():
        for t in instrs[-1].targets:
            if t not in preds:
                continue
            preds[t].append(name)
    return preds


def _is_increment(fn: HostFunction, block: str, idx: int) -> bool:
    ins = fn.blocks[block][idx]
    return (ins.op == "iadd" and ins.args[0] == "pc" and isinstance(ins.args[1], Const)
            and isinstance(ins.args[1].value, int) and ins.args[1].value > 0)


def _has_can_enter_after(fn: HostFunction, block: str, idx: int) -> bool:
    return any(i.op == "can_enter_jit" for i in fn.blocks[block][idx + 1:])


def _forward_arm(fn: HostFunction, preds, block: str, target) -> bool:
    """True when ``block`` is only reached when ``target > pc`` and the sibling arm enters the JIT."""
    ps = preds.get(block, [])
    if len(ps) != 1:
        return False
    term = fn.blocks[ps[0]][-1]
    if term.op != "branch" or term.targets[1] != block:
        return False
    cond = term.args[0]
    for ins in fn.blocks[ps[0]]:
        if ins.dst == cond and ins.op in ("icmp_lt", "icmp_le") and tuple(ins.args) == (target, "pc"):
            then = term.targets[0]
            return any(i.op == "can_enter_jit" for i in fn.blocks[then])
    return False


def validate_interpreter(program: HostProgram) -> List[str]:
    """Return diagnostics; an empty list means the definition is well annotated."""
    diags: List[str] = []
    if program.dispatch not in program.functions:
        return [f"no dispatch function {program.dispatch!r}"]
    fn = program.dispatch_function
    preds = _preds(fn)

    for f in program.functions.values():
        for name, instrs in f.blocks.items():
            if not instrs or instrs[-1].op not in ("branch", "jump", "ret", "fail"):
                diags.append(f"block {f.name}.{name} lacks a terminator")
            for t in instrs[-1].targets if instrs else ():
                if t not in f.blocks:
                    diags.append(f"block {f.name}.{name} jumps to unknown block {t}")

    merges = [(b, i, ins) for b, i, ins in iter_instrs(fn) if ins.op == "jit_merge_point"]
    head = None
    if not merges:
        diags.append("no merge point on dispatch loop")
    elif len(merges) > 1:
        diags.append("more than one merge point in dispatch function")
    else:
        b, i, ins = merges[0]
        if i != 0 or not preds[b]:
            diags.append("no merge point on dispatch loop")
        head = ins
    for f in program.functions.values():
        if f is fn:
            continue
        for b, _, ins in iter_instrs(f):
            if ins.op == "jit_merge_point":
                diags.append(f"merge point outside dispatch function in {f.name}.{b}")

    defined: Set[str] = set(fn.params)
    for _, _, ins in iter_instrs(fn):
        if ins.dst:
            defined.add(ins.dst)
    for b, _, ins in iter_instrs(fn):
        if ins.op not in ("jit_merge_point", "can_enter_jit"):
            continue
        for v in sorted(set(ins.greens) & set(ins.reds)):
            diags.append(f"color conflict: {v} is both green and red at {ins.op} in block {b}")
        for v in ins.greens + ins.reds:
            if v not in defined:
                diags.append(f"hint variable {v} at {ins.op} in block {b} is not a live variable")
        if head is not None and ins.op == "can_enter_jit" and (
                ins.greens != head.greens or ins.reds != head.reds):
            diags.append(f"can_enter_jit in block {b} disagrees with the merge point's colors")

    for b, i, ins in iter_instrs(fn):
        if ins.dst != "pc" or _is_increment(fn, b, i):
            continue
        if _has_can_enter_after(fn, b, i):
            continue
        src = ins.args[0] if ins.op == "move" else None
        if src is not None and _forward_arm(fn, preds, b, src):
            continue
        diags.append(f"missing can_enter_jit on backward pc transfer in block {b}")

    for f in program.functions.values():
        for b, _, ins in iter_instrs(f):
            if ins.op == "is_mj" and (f is not fn or HostFunction.handler_of(b) != "CALL"):
                diags.append(f"is_mj outside the CALL handler in {f.name}.{b}")
    return diags
