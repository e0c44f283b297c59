"""End-to-end verification: build, instrument, run and monitor."""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from cftl.formula import CftlFormula
from cftl.instrument import InstrumentationPlan, emit_plan
from cftl.lang.interpreter import ExitReport, ListSink, ObservationEvent, execute
from cftl.lang.syntax import Program
from cftl.runtime.engine import MonitorPool, TimingPoint, VerdictReport
from cftl.scfg import Scfg, build_scfg


@dataclass
class VerifyResult:
    report: VerdictReport
    exit: ExitReport
    plan: InstrumentationPlan
    scfg: Scfg
    events: list  # monitored observation sequence
    full_trace: Optional[list] = None  # every state and transition, when recorded


class _PoolSink:
    def __init__(self, pool: MonitorPool):
        self.pool = pool
        self.events: list = []

    def emit(self, ev: ObservationEvent) -> None:
        self.events.append(ev)
        self.pool.dispatch(ev)


class _QueueSink:
    """Hands events to a consumer thread through an ordered queue."""

    _DONE = object()

    def __init__(self, pool: MonitorPool):
        self.pool = pool
        self.events: list = []
        self.queue: queue.Queue = queue.Queue()
        self.error: Optional[BaseException] = None
        self.thread = threading.Thread(target=self._consume, daemon=True)
        self.thread.start()

    def _consume(self) -> None:
        while True:
            ev = self.queue.get()
            if ev is self._DONE:
                return
            if self.error is None:
                try:
                    self.pool.dispatch(ev)
                except BaseException as exc:  # surfaced in close()
                    self.error = exc

    def emit(self, ev: ObservationEvent) -> None:
        self.events.append(ev)
        self.queue.put(ev)

    def close(self) -> None:
        self.queue.put(self._DONE)
        self.thread.join()
        if self.error is not None:
            raise self.error


def record_trace(program: Program, symbols=None, scfg: Optional[Scfg] = None) -> list:
    """Complete run: every state and transition, with all program symbols."""
    g = scfg if scfg is not None else build_scfg(program)
    sink = ListSink()
    execute(program, None, sink, symbols=symbols, scfg=g)
    return sink.events


def verify(
    program: Program,
    formula: CftlFormula,
    mode: str = "sync",
    record: bool = False,
    optimised: bool = True,
) -> VerifyResult:
    g = build_scfg(program)
    plan = emit_plan(program, formula, g)
    pool = MonitorPool(formula, plan, optimised=optimised)
    zero = Fraction(0)
    pool.timing.append(TimingPoint(zero, "scfg_built", f"{len(g.vertices)} vertices, {len(g.edges)} edges"))
    for b in plan.bindings:
        pool.timing.append(TimingPoint(zero, "binding_instrumented", f"binding {b.id} {b}"))
    pool.timing.append(TimingPoint(zero, "program_start", program.name))
    if mode == "sync":
        sink = _PoolSink(pool)
        exit_report = execute(program, plan, sink, scfg=g)
    elif mode == "async":
        sink = _QueueSink(pool)
        try:
            exit_report = execute(program, plan, sink, scfg=g)
        finally:
            sink.close()
    else:
        raise ValueError(f"unknown mode {mode!r}")
    report = pool.finalize()
    full = None
    if record:
        full = record_trace(program, program_symbols(g) | formula.critical_symbols, g)
    return VerifyResult(report, exit_report, plan, g, sink.events, full)


def program_symbols(g: Scfg) -> frozenset:
    return frozenset(g.variables | g.functions)
