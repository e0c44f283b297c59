"""Tree-walking MiniLang interpreter driven by a simulated clock.

The interpreter walks the program, maps every state-inducing statement to its
SCFG vertex and emits observation events for the locations an
instrumentation plan asks for.  Time is simulated and exact: a call costs the
numeric value of its first argument, so runs are fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Protocol, Union

from cftl.lang.syntax import (
    Assign,
    AssignCall,
    BinOp,
    BuiltinCall,
    Call,
    Compare,
    If,
    ListLit,
    Loop,
    Name,
    Neg,
    Num,
    Pass,
    Program,
    Str,
)
from cftl.scfg import E, Element, Scfg, V, build_scfg

DEFAULT_CALL_COST = Fraction(1, 10)
STEP_COST = Fraction(1, 1000)
STAMP_EPSILON = Fraction(1, 10**6)
MAX_LOOP_ITERATIONS = 10_000


class MiniRuntimeError(RuntimeError):
    pass


class PlanMismatch(ValueError):
    pass


class _Marker:
    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __reduce__(self):
        return self.name


UNDEFINED = _Marker("UNDEFINED")
NOT_CALLED = _Marker("NOT_CALLED")


@dataclass(frozen=True)
class CallResult:
    """Value of a function symbol in the state produced by calling it."""

    callee: str
    args: tuple

    def __repr__(self) -> str:
        return f"{self.callee}({', '.join(format_value(a) for a in self.args)})"


def format_value(v: Any) -> str:
    from cftl.lang.syntax import format_number

    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (int, Fraction)):
        return format_number(v)
    if isinstance(v, str):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    return repr(v)


def is_number(v: Any) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


class SimClock:
    """Simulated program clock with strictly increasing observation stamps."""

    def __init__(self, now: Fraction = Fraction(0)):
        self.now = Fraction(now)
        self._last_stamp: Optional[Fraction] = None

    def advance(self, amount: Fraction) -> None:
        if amount < 0:
            raise ValueError("clock cannot go backwards")
        self.now += amount

    def stamp(self) -> Fraction:
        t = self.now
        if self._last_stamp is not None and t <= self._last_stamp:
            t = self._last_stamp + STAMP_EPSILON
        self._last_stamp = t
        return t


def call_cost(args: list) -> Fraction:
    if args and is_number(args[0]):
        value = Fraction(args[0])
        # non-positive durations would stall the clock
        return value if value > 0 else STEP_COST
    return DEFAULT_CALL_COST


@dataclass(frozen=True)
class ConcreteState:
    values: tuple  # ((symbol, value), ...) over the tracked symbols
    vertex: int
    time: Fraction
    assigned: Optional[str] = None
    called: Optional[str] = None

    def value(self, symbol: str) -> Any:
        for s, v in self.values:
            if s == symbol:
                return v
        return UNDEFINED

    @property
    def location(self) -> Element:
        return V(self.vertex)

    @property
    def key(self) -> tuple:
        return (self.time, 0)


@dataclass(frozen=True)
class TransitionRecord:
    start: Fraction
    duration: Fraction
    edge: int
    callee: Optional[str] = None
    assigned: Optional[str] = None

    @property
    def end(self) -> Fraction:
        return self.start + self.duration

    @property
    def location(self) -> Element:
        return E(self.edge)

    @property
    def key(self) -> tuple:
        return (self.start, 1)


Record = Union[ConcreteState, TransitionRecord]


@dataclass(frozen=True)
class ObservationEvent:
    seq: int
    stamp: Fraction
    record: Record

    @property
    def is_state(self) -> bool:
        return isinstance(self.record, ConcreteState)

    @property
    def location(self) -> Element:
        return self.record.location

    @property
    def key(self) -> tuple:
        return self.record.key


class EventSink(Protocol):
    def emit(self, event: ObservationEvent) -> None: ...


class ListSink:
    def __init__(self):
        self.events: list = []

    def emit(self, event: ObservationEvent) -> None:
        self.events.append(event)


@dataclass
class ExitReport:
    final_time: Fraction
    states: int
    transitions: int
    events_emitted: int
    env: dict = field(default_factory=dict)


class _Run:
    def __init__(self, program: Program, g: Scfg, locations, symbols, sink, clock: SimClock):
        self.program = program
        self.g = g
        self.locations = locations
        self.symbols = tuple(sorted(symbols))
        self.sink = sink
        self.clock = clock
        self.env: dict = {}
        self.cur = g.start
        self.seq = 0
        self.states = 0
        self.transitions = 0
        self.last_state: Optional[ConcreteState] = None
        self.locks = 0

    # events
    def _wanted(self, el: Element) -> bool:
        return self.locations is None or el in self.locations

    def _emit(self, record: Record) -> None:
        if not self._wanted(record.location):
            return
        event = ObservationEvent(self.seq, self.clock.stamp(), record)
        self.seq += 1
        self.sink.emit(event)

    def _snapshot(self, called: Optional[str], args: tuple) -> tuple:
        out = []
        for s in self.symbols:
            if s in self.g.functions and s not in self.g.variables:
                out.append((s, CallResult(s, args) if s == called else NOT_CALLED))
            else:
                out.append((s, _freeze(self.env.get(s, UNDEFINED))))
        return tuple(out)

    def start(self) -> None:
        state = ConcreteState(self._snapshot(None, ()), self.g.start, self.clock.now)
        self.last_state = state
        self.states += 1
        self._emit(state)

    def step(self, dst: int, cost: Fraction, assigned=None, called=None, args: tuple = ()) -> None:
        edge = self.g.edge_between.get((self.cur, dst))
        if edge is None:
            raise MiniRuntimeError(f"no SCFG edge from vertex {self.cur} to {dst}")
        start = self.clock.now
        self.clock.advance(cost)
        transition = TransitionRecord(start, cost, edge.index, called, assigned)
        state = ConcreteState(self._snapshot(called, args), dst, self.clock.now, assigned, called)
        self.transitions += 1
        self.states += 1
        self._emit(transition)
        self._emit(state)
        self.last_state = state
        self.cur = dst

    # evaluation
    def eval(self, e) -> Any:
        if isinstance(e, Num):
            return e.value
        if isinstance(e, Str):
            return e.value
        if isinstance(e, ListLit):
            return [self.eval(i) for i in e.items]
        if isinstance(e, Name):
            if e.id not in self.env:
                raise MiniRuntimeError(f"unknown identifier {e.id!r}")
            return self.env[e.id]
        if isinstance(e, Neg):
            v = self.eval(e.operand)
            if not is_number(v):
                raise MiniRuntimeError(f"cannot negate {format_value(v)}")
            return -v
        if isinstance(e, BinOp):
            a, b = self.eval(e.left), self.eval(e.right)
            if is_number(a) and is_number(b):
                return {"+": a + b, "-": a - b, "*": a * b}[e.op]
            if e.op == "+" and type(a) is type(b) and isinstance(a, (str, list)):
                return a + b
            raise MiniRuntimeError(f"type mismatch: {format_value(a)} {e.op} {format_value(b)}")
        if isinstance(e, Compare):
            a, b = self.eval(e.left), self.eval(e.right)
            if e.op == "==":
                return a == b
            if e.op == "!=":
                return a != b
            comparable = (is_number(a) and is_number(b)) or (type(a) is type(b) and isinstance(a, str))
            if not comparable:
                raise MiniRuntimeError(f"type mismatch: {format_value(a)} {e.op} {format_value(b)}")
            return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[e.op]
        if isinstance(e, BuiltinCall):
            v = self.eval(e.arg)
            if e.func == "len":
                if not isinstance(v, (str, list)):
                    raise MiniRuntimeError(f"len() of {format_value(v)}")
                return len(v)
            if not isinstance(v, int) or isinstance(v, bool):
                raise MiniRuntimeError(f"range() of {format_value(v)}")
            return list(range(v))
        raise MiniRuntimeError(f"cannot evaluate {e!r}")

    def truth(self, e) -> bool:
        return bool(self.eval(e))

    # statements
    def block(self, stmts) -> None:
        for s in stmts:
            self.stmt(s)

    def stmt(self, s) -> None:
        if isinstance(s, Pass):
            return
        if isinstance(s, Assign):
            self.env[s.target] = self.eval(s.value)
            self.step(self.g.vertex_of_stmt[s.sid], STEP_COST, assigned=s.target)
        elif isinstance(s, (Call, AssignCall)):
            args = [self.eval(a) for a in s.args]
            result = _builtin_result(s.callee, self)
            target = s.target if isinstance(s, AssignCall) else None
            if target is not None:
                self.env[target] = result
            frozen = tuple(_freeze(a) for a in args)
            self.step(self.g.vertex_of_stmt[s.sid], call_cost(args), target, s.callee, frozen)
        elif isinstance(s, If):
            for cond, sub in s.branches:
                if self.truth(cond):
                    self.block(sub)
                    return
            if s.orelse is not None:
                self.block(s.orelse)
        elif isinstance(s, Loop):
            head = self.cur
            count = 0
            if s.kind == "for":
                items = self.eval(s.source)
                if not isinstance(items, (list, str)):
                    raise MiniRuntimeError(f"cannot iterate over {format_value(items)}")
                for item in list(items):
                    count += 1
                    if count > MAX_LOOP_ITERATIONS:
                        raise MiniRuntimeError("loop iteration limit exceeded")
                    self.env[s.var] = item
                    self.block(s.body)
                    self._back(head)
            else:
                while self.truth(s.source):
                    count += 1
                    if count > MAX_LOOP_ITERATIONS:
                        raise MiniRuntimeError("loop iteration limit exceeded")
                    self.block(s.body)
                    self._back(head)
        else:
            raise MiniRuntimeError(f"unknown statement {s!r}")

    def _back(self, head: int) -> None:
        if self.cur != head:
            self.step(head, STEP_COST)

    def finish(self) -> None:
        if self.g.exit_vertex is not None and self.cur != self.g.exit_vertex:
            self.step(self.g.exit_vertex, STEP_COST)


def _freeze(v: Any) -> Any:
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


def _builtin_result(callee: str, run: _Run) -> Any:
    if callee == "query":
        return []
    if callee == "new_lock":
        run.locks += 1
        return f"lock-{run.locks}"
    return None


def execute(
    program: Program,
    plan=None,
    sink: Optional[EventSink] = None,
    clock: Optional[SimClock] = None,
    symbols=None,
    scfg: Optional[Scfg] = None,
) -> ExitReport:
    """Run ``program``, emitting events at the plan's locations.

    With ``plan=None`` every state and transition is emitted, giving the
    complete trace.  ``symbols`` selects which symbols each state records;
    by default the plan's critical symbols, or every program symbol.
    """
    if plan is not None and plan.program_digest != program.digest:
        raise PlanMismatch("instrumentation plan was built for a different program")
    g = scfg if scfg is not None else build_scfg(program)
    sink = sink if sink is not None else ListSink()
    clock = clock if clock is not None else SimClock()
    if symbols is None:
        symbols = plan.critical_symbols if plan is not None else g.variables | g.functions
    locations = None if plan is None else frozenset(plan.locations)
    run = _Run(program, g, locations, symbols, sink, clock)
    run.start()
    run.block(program.body)
    run.finish()
    return ExitReport(clock.now, run.states, run.transitions, run.seq, dict(run.env))
