from dataclasses import replace

import pytest
from hypothesis import HealthCheck, given, settings

from gen import loop_programs
from hybridjit.base_language import Op as BOp
from hybridjit.base_language import compile_source
from hybridjit.bench import get_program
from hybridjit.host_ir import (HS, US, Const, Hooks, HostInstr, HostReturn, Machine,
                               build_interpreter)
from hybridjit.trace_backend import Imm, Op, Reg, interpret_ir, walk
from hybridjit.tracing_engine import (ExecutionContext, MetaTracer, NonLoopingPath, Red,
                                      TraceTooLong, Walker, meta_trace)
from hybridjit.tracing_engine.core import Frame

INTERP = build_interpreter()


STACK = 1 << 16


class _Capture(Hooks):
    """Record the first interpreter state seen at each loop head, with a stack copy."""

    def __init__(self, limit=200):
        super().__init__()
        self.states = {}
        self.limit = limit
        self.seen = 0

    def on_can_enter(self, pc, stack, sp, fp):
        self.seen += 1
        if self.seen <= self.limit and pc not in self.states:
            self.states[pc] = (pc, list(stack), sp, fp)


def loop_states(bc, limit=200):
    cap = _Capture(limit)
    Machine(INTERP, bc, hooks=cap, stack_capacity=STACK).run()
    return list(cap.states.values())


class _OneIteration(Hooks):
    def __init__(self, key):
        super().__init__()
        self.watch = {key}
        self.seen = 0

    def on_merge(self, pc, stack, sp, fp, depth):
        self.seen += 1
        if self.seen == 2:
            return HostReturn(("state", pc, sp, fp))
        return None


def interpret_one_iteration(bc, key, stack, sp, fp):
    hooks = _OneIteration(key)
    m = Machine(INTERP, bc, hooks=hooks, stack=stack, stack_capacity=STACK)
    res = m.dispatch(key, stack, sp, fp)
    return res, m.output


def trace_at(bc, state, **kw):
    pc, stack, sp, fp = state
    ctx = ExecutionContext(list(stack), [])
    return meta_trace(INTERP, bc, ctx, pc, sp, fp, **kw), ctx


def sum_tail_trace():
    bc = get_program("sum-tail").scaled(n=50).bytecode()
    state = next(s for s in loop_states(bc) if s[0] == bc.function("sum").entry)
    out, _ = trace_at(bc, state)
    return bc, out.ir


class TestMetaTrace:
    def test_sum_tail_trace_shape(self):
        bc, ir = sum_tail_trace()
        ops = [n for n in walk(ir.body)]
        names = [o.name for o in ops]
        assert "call" not in names and "callout" not in names
        guards = [o for o in ops if o.name == "guard"]
        assert len(guards) == 1
        assert any(o.name == "add" and all(isinstance(a, Reg) for a in o.args) for o in ops)
        assert names[-1] == "jump"

    def test_loop_guard_asserts_false_and_deopts_to_then_branch(self):
        bc, ir = sum_tail_trace()
        guard = next(o for o in walk(ir.body) if o.name == "guard")
        jump_if = next(pc for pc, i in enumerate(bc.instructions) if i.op == BOp.JUMP_IF)
        assert guard.aux is False
        assert guard.snapshot.pc == jump_if + 1

    def test_residue_is_red_only(self):
        _, ir = sum_tail_trace()
        for op in walk(ir.body):
            if op.args:
                assert any(isinstance(a, Reg) for a in op.args), op

    def test_return_chain_guards_flag_is_us(self):
        bc = get_program("sum").scaled(n=300).bytecode()
        # the return chain re-enters the loop head just after the recursive CALL
        after_call = next(pc for pc, i in enumerate(bc.instructions) if i.op == BOp.CALL) + 1
        state = next(s for s in loop_states(bc, 2000) if s[0] == after_call)
        out, _ = trace_at(bc, state)
        ops = list(walk(out.ir.body))
        defs = {o.dst[0]: o for o in ops if o.dst}
        flag_guards = [(defs[o.args[0]].args[1].value, o.aux) for o in ops
                       if o.name == "guard" and o.args[0] in defs and defs[o.args[0]].name == "eq"
                       and isinstance(defs[o.args[0]].args[1], Imm)
                       and defs[o.args[0]].args[1].value in (HS, US)]
        assert (US, True) in flag_guards and (HS, False) in flag_guards

    def test_trace_too_long(self):
        bc = get_program("sum-tail").scaled(n=50).bytecode()
        state = loop_states(bc)[0]
        out, _ = trace_at(bc, state, max_ops=5)
        assert out.ir is None and isinstance(out.abort, TraceTooLong)
        assert out.resume[0] == "state"

    def test_non_looping_path(self):
        src = ("let rec f n = if n <= 0 then 0 else f (n - 1) in "
               "let rec g n = if n <= 0 then 0 else g (n - 1) + f 3 in print_int (g 30)")
        bc = compile_source(src)
        g = bc.function("g").entry
        state = next(s for s in loop_states(bc, 5000) if s[0] == g)
        out, _ = trace_at(bc, state, max_merges=2)
        assert isinstance(out.abort, NonLoopingPath)


class TestEvalFold:
    def walker(self):
        return Walker(INTERP, compile_source("print_int 1"), is_mj=False, max_ops=100)

    def test_all_green_executes(self):
        w = self.walker()
        f = Frame(INTERP.dispatch_function, "loop", 0, {"pc": 3})
        w.eval_fold(f, HostInstr("icmp_le", "c", ("pc", Const(5))))
        assert f.env["c"] is True and w.out == []

    def test_pc_increment_is_folded(self):
        w = self.walker()
        f = Frame(INTERP.dispatch_function, "loop", 0, {"pc": 3})
        w.eval_fold(f, HostInstr("iadd", "pc", ("pc", Const(1))))
        assert f.env["pc"] == 4 and w.out == []

    def test_mixed_emits_add_immediate(self):
        w = self.walker()
        r = w.new_reg()
        f = Frame(INTERP.dispatch_function, "loop", 0, {"sp": Red(r, 10)})
        w.eval_fold(f, HostInstr("iadd", "sp", ("sp", Const(1))))
        assert [(o.name, o.args) for o in w.out] == [("add", (r, Imm(1)))]
        assert f.env["sp"].value == 11

    def test_stack_read_with_red_index(self):
        w = self.walker()
        r = w.new_reg()
        f = Frame(INTERP.dispatch_function, "loop", 0, {"sp": Red(r, 0), "stack": []})
        w.step([replace_frame(f, HostInstr("array_read", "v", ("stack", "sp")))])
        assert w.out[0].name == "stack_load" and w.out[0].args == (r,)


def replace_frame(frame, ins):
    """A frame positioned at a one-instruction block holding ``ins``."""
    fn = replace(frame.fn, blocks={"b": (ins,)})
    return Frame(fn, "b", 0, frame.env)


def _replay_once(ir, key, stack, sp, fp):
    """Run the trace body once; the closing jump becomes an exit reporting the state."""
    body = list(ir.body)
    last = body[-1]
    body[-1] = Op("exit", (), (Imm(key),) + last.args)
    once = replace(ir, body=body)
    out = []
    res = interpret_ir(once, stack, (sp, fp), output=out)
    return res, out


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(loop_programs())
def test_replay_equivalence(src):
    bc = compile_source(src)
    seen = set()
    for state in loop_states(bc, 400):
        key = state[0]
        if key in seen:
            continue
        seen.add(key)
        out, ctx = trace_at(bc, state)
        if out.ir is None:
            continue
        _, stack, sp, fp = state
        s_trace = list(stack)
        (pc_t, sp_t, fp_t), printed_t = _replay_once(out.ir, key, s_trace, sp, fp)
        s_interp = list(stack)
        res, printed_i = interpret_one_iteration(bc, key, s_interp, sp, fp)
        assert res == ("state", key, sp_t, fp_t)
        assert pc_t == key
        assert s_trace == s_interp
        assert printed_t == printed_i
        # the tracer's own concrete execution agrees too
        assert out.resume == ("state", key, sp_t, fp_t) and ctx.stack == s_interp


def test_meta_tracer_closes_on_own_key():
    bc, ir = sum_tail_trace()
    assert ir.kind == "trace" and ir.key == bc.function("sum").entry
    assert ir.body[-1].name == "jump"
    assert isinstance(MetaTracer(INTERP, bc, ExecutionContext([], []), ir.key), Walker)


@pytest.mark.parametrize("name", ["fib-tail", "sum", "fact", "prefix_sum"])
def test_corpus_traces_replay(name):
    bc = get_program(name).bytecode()
    done = set()
    for state in loop_states(bc, 3000):
        if state[0] in done:
            continue
        done.add(state[0])
        out, ctx = trace_at(bc, state)
        if out.ir is None:
            continue
        _, stack, sp, fp = state
        s = list(stack)
        (pc_t, sp_t, fp_t), _ = _replay_once(out.ir, state[0], s, sp, fp)
        s2 = list(stack)
        res, _ = interpret_one_iteration(bc, state[0], s2, sp, fp)
        assert res == ("state", state[0], sp_t, fp_t) and s == s2
