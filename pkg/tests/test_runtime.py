import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from gen import loop_programs
from hybridjit.base_language import compile_source, parse, reference_run
from hybridjit.bench import get_program
from hybridjit.runtime import (BLACKLIST_AFTER, MAIN, MODES, DeoptError, PolicyError, Runtime,
                               StrategyPolicy, base_name, parse_strategy, run_program)
from hybridjit.trace_backend import DeoptSnapshot, FrameSnapshot, Imm


def reference(src):
    return reference_run(parse(src))[0]


def rt_for(name, mode, overrides=None, **kw):
    prog = get_program(name)
    return Runtime(prog.bytecode(), StrategyPolicy(mode, dict(overrides or {})), **kw)


class TestPolicy:
    def test_parse(self):
        text = "# strategy\nfib = method\n\n  sum=trace  # loop\n"
        assert parse_strategy(text) == {"fib": "method", "sum": "trace"}

    @pytest.mark.parametrize("bad", ["fib", "fib = jit", "= method"])
    def test_parse_errors(self, bad):
        with pytest.raises(PolicyError, match="line 1"):
            parse_strategy(bad)

    def test_strategy_for(self):
        assert StrategyPolicy("interp").strategy_for("f") is None
        assert StrategyPolicy("trace").strategy_for(MAIN) == "trace"
        assert StrategyPolicy("method").strategy_for(MAIN) is None
        assert StrategyPolicy("method").strategy_for("f") == "method"
        h = StrategyPolicy("hybrid", {"f": "method"})
        assert h.strategy_for("f#2") == "method" and h.strategy_for("g") == "trace"
        assert h.strategy_for(MAIN) == "trace"
        assert base_name("f#2") == "f"

    def test_unknown_mode_and_strategy(self):
        with pytest.raises(PolicyError):
            StrategyPolicy("jit")
        with pytest.raises(PolicyError):
            StrategyPolicy("hybrid", {"f": "inline"})

    def test_unknown_function(self):
        with pytest.raises(PolicyError, match="unknown function"):
            rt_for("fib", "hybrid", {"nope": "method"})

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            rt_for("fib", "trace", threshold=0)


class TestProfiling:
    def sum_tail(self, threshold):
        bc = get_program("sum-tail").scaled(n=50).bytecode()
        rt = Runtime(bc, StrategyPolicy("trace"), threshold=threshold)
        return rt, rt.run()

    @pytest.mark.parametrize("t", [1, 10, 50])
    def test_compiles_when_threshold_reached(self, t):
        rt, out = self.sum_tail(t)
        assert out == [1275]
        assert rt.stats.encounters[("trace", 0)] == t
        assert rt.stats.first_entry[("trace", 0)] == t
        assert ("trace", 0) in rt.registry

    def test_no_compile_below_threshold(self):
        rt, out = self.sum_tail(51)
        assert out == [1275] and rt.stats.compiles == 0 and rt.stats.unit_entries == 0

    def test_interp_mode_has_no_hooks(self):
        rt = rt_for("fib", "interp")
        rt.run()
        assert rt.stats.compiles == 0 and rt.stats.encounters == {}

    def test_blacklist_after_repeated_aborts(self):
        rt = rt_for("sum-tail", "trace", threshold=5, max_trace_ops=3)
        assert rt.run() == reference(get_program("sum-tail").source)
        assert rt.stats.compiles == 0
        assert rt.stats.aborts >= BLACKLIST_AFTER and rt.blacklist
        assert all("trace@" in r for r in rt.stats.abort_reasons)
        before = rt.stats.aborts
        rt.run()
        assert rt.stats.aborts == 0 and before  # blacklisted keys are not traced again

    def test_method_failure_falls_back_to_tracing(self):
        rt = rt_for("tak", "method", threshold=2, max_ifs=0)
        assert rt.run() == reference(get_program("tak").source)
        assert rt.stats.fallbacks == 1 and rt.stats.method_compiles == 0
        assert rt.stats.trace_compiles >= 1


class TestRuns:
    def test_persisted_units_are_reused(self):
        rt = rt_for("fib", "method", threshold=5)
        first = rt.run()
        assert rt.stats.compiles == 1
        assert rt.run() == first
        assert rt.stats.compiles == 0 and rt.stats.method_entries > 0

    def test_reset_between_runs(self):
        rt = rt_for("fib", "method", threshold=5, persist_jit=False)
        rt.run()
        rt.run()
        assert rt.stats.compiles == 1 and len(rt.units()) == 1

    def test_stats_are_per_run(self):
        rt = rt_for("sum-tail", "trace", threshold=5)
        rt.run()
        a = rt.stats.interpreted_steps
        rt.run()
        assert 0 < rt.stats.interpreted_steps <= a

    def test_recorded_ir_is_kept(self):
        rt = rt_for("sum-tail", "trace", threshold=5)
        rt.run()
        for unit in rt.units():
            assert (unit.strategy, unit.key) in rt.recorded

    @pytest.mark.parametrize("mode", ["trace", "hybrid", "method"])
    def test_flag_balance(self, mode):
        rt = rt_for("fib-sum", mode, threshold=3, instrument=True)
        assert rt.run() == reference(get_program("fib-sum").source)
        rt.check_flag_balance()


@pytest.mark.parametrize("name", ["sum-tail", "fib", "fib-tail", "sum-fib"])
def test_every_forced_guard_resumes_correctly(name):
    expected = reference(get_program(name).source)
    probe = rt_for(name, "trace", threshold=3)
    assert probe.run() == expected
    n_guards = max((len(u.deopt) for u in probe.units()), default=0)
    assert n_guards >= 1
    for g in range(n_guards):
        rt = rt_for(name, "trace", threshold=3, force_guard=g)
        assert rt.run() == expected, f"guard {g}"


def test_bad_snapshot_is_rejected():
    rt = rt_for("sum-tail", "trace")
    snap = DeoptSnapshot((FrameSnapshot(rt.program.dispatch_function.name, "nowhere", 0, ()),))
    with pytest.raises(DeoptError):
        rt.resume_from_snapshot(snap, {})
    fn = rt.program.dispatch_function
    snap = DeoptSnapshot((FrameSnapshot(fn.name, fn.entry, 0, (("sp", Imm(-4)), ("fp", Imm(0)))),))
    with pytest.raises(DeoptError, match="sp"):
        rt.resume_from_snapshot(snap, {})


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(loop_programs(), st.integers(1, 4), st.data())
def test_modes_agree_on_random_programs(src, threshold, data):
    expected = reference(src)
    bc = compile_source(src)
    names = sorted({base_name(f.name) for f in bc.functions})
    overrides = {n: data.draw(st.sampled_from(("trace", "method"))) for n in names}
    for mode in MODES:
        rt = Runtime(bc, StrategyPolicy(mode, overrides if mode == "hybrid" else {}),
                     threshold=threshold, instrument=True)
        assert rt.run() == expected, mode
        rt.check_flag_balance()
        assert rt.run() == expected, mode  # second run on persisted units


def test_run_program_helper():
    bc = get_program("sum").bytecode()
    assert run_program(bc, "hybrid", {"sum": "method"}, threshold=2) == reference(get_program("sum").source)


def test_trace_recorded_inside_a_callout_stops_at_method_code():
    # a trace of f0 started inside the interpreted callout to drive must not run on into drive
    src = ("let rec f0 n a0 = if n <= 0 then a0 else 0 + (f0 (n - 1) (0)) in\n"
           "let rec drive i acc = if i <= 0 then acc else drive (i - 1) (acc + ((f0 2 (0)))) in "
           "print_int (drive 5 0)")
    rt = Runtime(compile_source(src), StrategyPolicy("hybrid", {"drive": "method", "f0": "trace"}),
                 threshold=3, instrument=True)
    for _ in range(3):
        assert rt.run() == reference(src)
        rt.check_flag_balance()
