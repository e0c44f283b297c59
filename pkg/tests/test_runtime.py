from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from cftl.formula import parse_formula
from cftl.instrument import emit_plan
from cftl.lang import ListSink, execute, parse_program
from cftl.pipeline import record_trace, verify
from cftl.runtime import (
    MonitorPool,
    OutOfOrderEvent,
    TraceFormatError,
    dumps_trace,
    generated_bindings,
    loads_trace,
    oracle_evaluate,
)
from cftl.runtime.engine import TIMING_CLASSES
from cftl.truth import Verdict

from checks import earliest_false_key, static_violations
from gen import DataSource, gen_formula, gen_program

CASES = Path(__file__).resolve().parent.parent / "casestudies"
T, F, U = Verdict.TRUE, Verdict.FALSE, Verdict.UNKNOWN


def load(name):
    p = parse_program((CASES / f"{name}.mini").read_text(), name)
    f = parse_formula((CASES / f"{name}.cftl").read_text())
    return p, f


@pytest.mark.parametrize(
    "name, verdict, monitors",
    [
        ("example1", T, 1),
        ("example2", F, 3),
        ("example3", T, 2),
        ("loop_story", T, 6),
        ("loop_dds", T, 1),
    ],
)
def test_case_studies(name, verdict, monitors):
    p, f = load(name)
    result = verify(p, f, record=True)
    assert result.report.global_verdict is verdict
    assert result.report.monitors_instantiated == monitors
    assert oracle_evaluate(result.full_trace, f) is verdict
    assert verify(p, f, mode="async").report.global_verdict is verdict


def test_example_two_verdicts_per_call():
    p, f = load("example2")
    report = verify(p, f).report
    assert [b.verdict for b in report.per_binding] == [F, F, F]
    assert report.to_json()["global"] == F.value


def test_loop_dds_trace_shape():
    p, _ = load("loop_dds")
    events = record_trace(p)
    states = [e.record for e in events if e.is_state]
    called = [s for s in states if s.called == "f"]
    # the four f calls, each between a state with f not called and one with the call result
    assert len(called) == 4
    durations = [e.record.duration for e in events if not e.is_state and e.record.callee == "f"]
    assert durations == [Fraction(1, 10)] * 3 + [Fraction(11, 10)]


def test_oracle_examples():
    p, f = load("loop_dds")
    assert oracle_evaluate(record_trace(p), f) is T
    p2, f2 = load("example2")
    assert oracle_evaluate(record_trace(p2), f2) is F
    always = parse_formula("forall q in changes(a) . true")
    assert oracle_evaluate(record_trace(p), always) is T
    assert generated_bindings([], f) == []
    assert oracle_evaluate([], f) is T


def test_unresolved_next_stays_unknown():
    p = parse_program("a = 1\n")
    f = parse_formula("forall q in changes(a) . duration(next_call(q, g)) in [0, 1]")
    result = verify(p, f, record=True)
    assert result.report.global_verdict is U
    assert oracle_evaluate(result.full_trace, f) is U


def test_incident_of_first_state_is_undecided():
    p = parse_program("f(1)\n")
    f = parse_formula("forall t in calls(f) . duration(incident(source(t))) in [0, 1]")
    assert verify(p, f).report.global_verdict is U


def test_timing_classes_in_causal_order():
    p, f = load("example1")
    timing = verify(p, f).report.timing
    classes = [tp.event_class for tp in timing]
    assert set(classes) <= set(TIMING_CLASSES)
    first = {c: classes.index(c) for c in set(classes)}
    assert first["scfg_built"] < first["binding_instrumented"] < first["program_start"]
    assert first["program_start"] < first["monitor_instantiated"] < first["monitor_updated"]
    assert classes[-1] == "verdict_reached" or classes.index("verdict_reached") > first["monitor_updated"]
    times = [tp.time for tp in timing]
    assert times == sorted(times)
    csv = verify(p, f).report.timing_csv()
    assert csv.splitlines()[0] == "time,class,description"


def test_out_of_order_dispatch():
    p, f = load("example1")
    plan = emit_plan(p, f)
    sink = ListSink()
    execute(p, plan, sink)
    pool = MonitorPool(f, plan)
    pool.dispatch(sink.events[1])
    with pytest.raises(OutOfOrderEvent):
        pool.dispatch(sink.events[0])


def test_monitored_events_stay_in_plan():
    p, f = load("example2")
    result = verify(p, f)
    assert {e.location for e in result.events} <= result.plan.locations
    assert len(result.events) == 4


# traces


def test_trace_round_trip():
    p, _ = load("example3")
    events = record_trace(p)
    text = dumps_trace(events)
    assert loads_trace(text) == events
    assert dumps_trace(loads_trace(text)) == text


def test_corrupt_trace_reports_line():
    p, _ = load("example1")
    lines = dumps_trace(record_trace(p)).splitlines()
    lines[3] = lines[3][:-5]
    with pytest.raises(TraceFormatError) as info:
        loads_trace("\n".join(lines))
    assert info.value.line == 4
    swapped = [lines[0], lines[2], lines[1]]
    with pytest.raises(TraceFormatError) as info:
        loads_trace("\n".join(swapped))
    assert info.value.line == 3


# properties on random programs


def random_pair(data):
    src = DataSource(data)
    p = parse_program(gen_program(src))
    return p, parse_formula(gen_formula(src))


@settings(max_examples=120, deadline=None)
@given(st.data())
def test_engine_matches_oracle(data):
    p, f = random_pair(data)
    result = verify(p, f, record=True)
    assert result.report.global_verdict is oracle_evaluate(result.full_trace, f)
    assert verify(p, f, optimised=False).report.global_verdict is result.report.global_verdict


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_sync_and_async_agree(data):
    p, f = random_pair(data)
    a, b = verify(p, f, mode="sync"), verify(p, f, mode="async")
    assert a.report.to_json() == b.report.to_json()
    assert a.report.timing_csv() == b.report.timing_csv()


@settings(max_examples=80, deadline=None)
@given(st.data())
def test_static_analysis_covers_runtime(data):
    p, f = random_pair(data)
    assert static_violations(verify(p, f, record=True), f) == []


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_false_reported_at_earliest_event(data):
    p, f = random_pair(data)
    result = verify(p, f, record=True)
    pool = MonitorPool(f, result.plan)
    engine_key = None
    for ev in result.events:
        pool.dispatch(ev)
        if any(m.monitor.verdict is F for m in pool.monitors):
            engine_key = ev.key
            break
    assert engine_key == earliest_false_key(result.full_trace, f)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_replayed_trace_gives_same_verdict(data):
    p, f = random_pair(data)
    result = verify(p, f, record=True)
    replay = loads_trace(dumps_trace(result.full_trace))
    assert oracle_evaluate(replay, f) is result.report.global_verdict
