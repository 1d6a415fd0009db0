import pytest
from hypothesis import HealthCheck, given, settings

from gen import loop_programs, programs
from hybridjit.base_language import compile_source
from hybridjit.bench import get_program
from hybridjit.host_ir import build_interpreter
from hybridjit.method_engine import jit_meta_method
from hybridjit.trace_backend import (DeoptSnapshot, FrameSnapshot, GuardFail, Imm, JumpOut,
                                     MalformedTrace, Op, Reg, Registry, Returned, TraceIR,
                                     build_unit, compile_ir, execute_unit, fold_constants,
                                     generate_source, interpret_ir, number_guards, render, verify)
from hybridjit.trace_backend.optimize import optimize
from test_method_engine import _Entries, _hs_call
from test_tracing_engine import STACK, loop_states, trace_at

INTERP = build_interpreter()
r = [Reg(i) for i in range(8)]


def demo_ir():
    snap = DeoptSnapshot((FrameSnapshot("dispatch", "loop", 0,
                                        (("pc", Imm(4)), ("sp", r[3]), ("fp", r[1]))),), pc=4)
    ir = TraceIR("trace", 0, (r[0], r[1]), [
        Op("add", (r[2],), (Imm(2), Imm(3))),
        Op("add", (r[3],), (r[0], r[2])),
        Op("stack_store", (), (r[3], Imm(7))),
        Op("stack_load", (r[4],), (r[3],)),
        Op("mul", (r[5],), (r[4], Imm(1))),
        Op("lt", (r[6],), (r[3], Imm(100))),
        Op("guard", (), (r[6],), True, snap),
        Op("sub", (r[7],), (r[3], Imm(4))),
        Op("jump", (), (r[7], r[1]), 0)], "demo", 8)
    return number_guards(ir)


RAW = """\
trace demo@0(r0, r1)
  r2 = add $2, $3
  r3 = add r0, r2
  stack_store r3, $7
  r4 = stack_load r3
  r5 = mul r4, $1
  r6 = lt r3, $100
  guard[True] r6  ; guard #0 deopt pc=4
  r7 = sub r3, $4
  jump[0] r7, r1
"""

FOLDED = """\
trace demo@0(r0, r1)
  r2 = const $5
  r3 = add r0, $5
  stack_store r3, $7
  r4 = stack_load r3
  r5 = move r4
  r6 = lt r3, $100
  guard[True] r6  ; guard #0 deopt pc=4
  r7 = sub r3, $4
  jump[0] r7, r1
"""

OPTIMIZED = """\
trace demo@0(r0, r1)
  r3 = add r0, $5
  stack_store r3, $7
  r6 = lt r3, $100
  guard[True] r6  ; guard #0 deopt pc=4
  r7 = add r0, $1
  jump[0] r7, r1
"""


class TestListings:
    def test_render(self):
        assert render(demo_ir()) == RAW

    def test_fold(self):
        assert render(fold_constants(demo_ir())) == FOLDED

    def test_optimize(self):
        assert render(optimize(fold_constants(demo_ir()))) == OPTIMIZED

    def test_without_forwarding_the_load_stays(self):
        text = render(optimize(fold_constants(demo_ir()), forward_memory=False))
        assert "stack_load" not in text  # unused, so still dead
        ir = demo_ir()
        ir.body[5] = Op("lt", (r[6],), (r[4], Imm(100)))
        kept = render(optimize(fold_constants(number_guards(ir)), forward_memory=False))
        assert "stack_load" in kept
        assert "stack_load" not in render(optimize(fold_constants(number_guards(ir))))

    def test_trace_codegen_is_a_while_loop(self):
        src, _ = generate_source(optimize(fold_constants(demo_ir())))
        assert src.splitlines()[0] == "def unit(stack, r0, r1):"
        assert "while True:" in src and "return (0, r3, r1,)" in src

    def test_guard_exit_and_forced_guard(self):
        stack = [0] * 200
        fn, _ = compile_ir(demo_ir())
        assert fn(stack, 0, 9) == (0, 100, 9) and stack[99] == 7
        forced, _ = compile_ir(demo_ir(), force_guard=0)
        assert forced([0] * 200, 0, 9) == (0, 5, 9)
        assert interpret_ir(demo_ir(), [0] * 200, (0, 9)) == (0, 100, 9)
        assert interpret_ir(demo_ir(), [0] * 200, (0, 9), force_guard=0) == (0, 5, 9)


class TestVerify:
    def test_read_before_write(self):
        ir = TraceIR("trace", 0, (r[0], r[1]), [Op("jump", (), (r[2], r[1]))])
        with pytest.raises(MalformedTrace, match="read before written"):
            verify(ir)

    def test_falls_off_end(self):
        ir = TraceIR("trace", 0, (r[0], r[1]), [Op("add", (r[2],), (r[0], Imm(1)))])
        with pytest.raises(MalformedTrace, match="falls off"):
            verify(ir)

    def test_guard_needs_snapshot(self):
        ir = TraceIR("trace", 0, (r[0], r[1]), [Op("guard", (), (r[0],), True),
                                                Op("jump", (), (r[0], r[1]))])
        with pytest.raises(MalformedTrace, match="snapshot"):
            verify(ir)

    def test_jump_not_allowed_in_method(self):
        ir = TraceIR("method", 0, (r[0], r[1]), [Op("jump", (), (r[0], r[1]))])
        with pytest.raises(MalformedTrace):
            verify(ir)

    def test_bad_arity(self):
        ir = TraceIR("trace", 0, (r[0], r[1]), [Op("add", (r[2],), (r[0],)),
                                                Op("jump", (), (r[0], r[1]))])
        with pytest.raises(MalformedTrace, match="arity"):
            verify(ir)


class TestRegistry:
    def test_link_and_lookup(self):
        reg = Registry()
        a = build_unit(demo_ir())
        reg.insert(a)
        assert reg.lookup("trace", 0) is a and ("trace", 0) in reg and len(reg) == 1
        assert reg.link(a, 0) is a
        assert reg.link(a, 5) is None

    def test_execute_unit_decodes_exits(self):
        unit = build_unit(demo_ir())
        res = execute_unit(unit, [0] * 200, 0, 1)
        assert isinstance(res, GuardFail) and res.gid == 0 and unit.entries == 1
        m = build_unit(TraceIR("method", 3, (r[0], r[1]), [Op("ret", (), (r[0],))]))
        assert execute_unit(m, [], 42, 0) == Returned(42)
        e = build_unit(TraceIR("method", 3, (r[0], r[1]), [Op("exit", (), (Imm(7), r[0], r[1]))]))
        assert execute_unit(e, [], 4, 2) == JumpOut(7, 4, 2)


# differential checks: every pipeline stage and both executors agree

def variants(ir):
    folded = fold_constants(ir)
    return {"raw": ir, "fold": folded, "opt": optimize(folded),
            "opt-noforward": optimize(folded, forward_memory=False)}


def _resume_state(ir, res):
    """Guard number and the interpreter cells its snapshot rebuilds (stack aside)."""
    gid, *vals = res
    snap = next(g.snapshot for g in ir.guards() if g.gid == gid)
    values = dict(zip(snap.registers(), vals))
    frames = []
    for f in snap.frames:
        env = {}
        for var, v in f.env:
            x = values[v] if isinstance(v, Reg) else v.value
            if not isinstance(x, (list, tuple)):
                env[var] = x
        frames.append((f.function, f.block, f.index, env))
    return gid, frames


def check_trace(bc, state):
    out, _ = trace_at(bc, state)
    if out.ir is None:
        return 0
    _, stack, sp, fp = state
    results = []
    for name, ir in variants(out.ir).items():
        s1, o1 = list(stack), []
        a = interpret_ir(ir, s1, (sp, fp), output=o1)
        s2, o2 = list(stack), []
        fn, _ = compile_ir(ir, output=o2)
        b = fn(s2, sp, fp)
        assert a == b, name
        assert s1 == s2 and o1 == o2, name
        results.append((name, _resume_state(ir, a), s1, o1))
    first = results[0]
    for name, state_, s, o in results[1:]:
        assert state_ == first[1], name
        assert s == first[2] and o == first[3], name
    return 1


def check_methods(bc):
    irs = {f.entry: jit_meta_method(INTERP, bc, f.entry) for f in bc.functions}
    cap = _Entries(set(irs))
    from hybridjit.host_ir import Machine
    Machine(INTERP, bc, hooks=cap, stack_capacity=STACK).run()
    for pc, stack, sp, fp in cap.states.values():
        ref_stack = list(stack)
        want = interpret_ir(irs[pc], ref_stack, (sp, fp), call=_hs_call(irs))
        for name in ("fold", "opt", "opt-noforward"):
            table = {e: variants(ir)[name] for e, ir in irs.items()}
            units = {}

            def call(target, stk, csp, cfp):
                return units[target](stk, csp, cfp)

            for e, ir in table.items():
                units[e], _ = compile_ir(ir, call=call)
            s = list(stack)
            got = units[pc](s, sp, fp)
            assert got == want, name
            assert s[:got[1]] == ref_stack[:got[1]], name


@pytest.mark.parametrize("name", ["fib-tail", "sum", "sum-tail", "fact", "ary", "prefix_sum", "sieve"])
def test_corpus_trace_pipeline(name):
    bc = get_program(name).bytecode()
    assert sum(check_trace(bc, s) for s in loop_states(bc, 3000)) >= 1


@pytest.mark.parametrize("name", ["fib", "tak", "ack", "fib-sum"])
def test_corpus_method_pipeline(name):
    check_methods(get_program(name).bytecode())


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(loop_programs())
def test_random_trace_pipeline(src):
    bc = compile_source(src)
    for s in loop_states(bc, 400):
        check_trace(bc, s)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(programs())
def test_random_method_pipeline(src):
    check_methods(compile_source(src))
