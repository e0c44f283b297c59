"""Online monitoring: dispatching observation events to monitors.

Each static binding has sites, the locations where its variables bind.  An
event at a site that belongs to the variable's quantification domain either
starts a new monitor (first variable), or completes every compatible runtime
prefix of that binding: a live monitor still waiting for the variable is
updated, otherwise a new monitor is instantiated from the configuration of
the prefix's monitor.  Atoms are resolved by following their selector chains
through the observed events, waiting for later events where necessary.
"""

from __future__ import annotations

import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from cftl.formula import CftlFormula, DomainKind, DurationIn
from cftl.instrument import InstrumentationPlan, StaticBinding
from cftl.lang.interpreter import ConcreteState, ObservationEvent, TransitionRecord
from cftl.monitor import ConfigurationMap, Monitor, instantiate_from, snapshot_configuration
from cftl.truth import Verdict

log = logging.getLogger(__name__)

TIMING_CLASSES = (
    "scfg_built",
    "binding_instrumented",
    "program_start",
    "state_change",
    "monitor_instantiated",
    "monitor_updated",
    "verdict_reached",
)


class OutOfOrderEvent(ValueError):
    pass


@dataclass(frozen=True)
class TimingPoint:
    time: Fraction
    event_class: str
    description: str


@dataclass(eq=False)
class RuntimeMonitor:
    id: int
    binding: StaticBinding
    elements: list  # ObservationEvents bound so far, one per variable
    monitor: Monitor
    collapse_seq: Optional[int] = None

    @property
    def live(self) -> bool:
        return not self.monitor.collapsed

    @property
    def key(self) -> tuple:
        return tuple(e.seq for e in self.elements)

    def describe(self) -> str:
        parts = []
        for e in self.elements:
            kind = "state" if e.is_state else "transition"
            parts.append(f"{kind}@{e.location}#{e.seq}")
        return f"{self.binding}:(" + ", ".join(parts) + ")"


@dataclass(eq=False)
class _Prefix:
    elements: tuple
    origin: RuntimeMonitor


@dataclass(eq=False)
class _Cursor:
    monitor: RuntimeMonitor
    atom: int
    step: int  # index of the step still to resolve
    anchor: ObservationEvent
    done: bool = False


@dataclass
class BindingResult:
    binding: str
    static_binding: int
    verdict: Verdict
    seq: Optional[int]


@dataclass
class VerdictReport:
    global_verdict: Verdict
    per_binding: list
    timing: list
    monitors_instantiated: int
    discarded_partial: int = 0

    def to_json(self) -> dict:
        return {
            "global": self.global_verdict.value,
            "monitors_instantiated": self.monitors_instantiated,
            "discarded_partial": self.discarded_partial,
            "bindings": [
                {
                    "binding": b.binding,
                    "static_binding": b.static_binding,
                    "verdict": b.verdict.value,
                    "seq": b.seq,
                }
                for b in self.per_binding
            ],
        }

    def timing_csv(self) -> str:
        import csv
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "class", "description"])
        for tp in self.timing:
            w.writerow([str(tp.time), tp.event_class, tp.description])
        return buf.getvalue()


def _in_domain(q, ev: ObservationEvent) -> bool:
    rec = ev.record
    if q.kind in (DomainKind.CHANGES, DomainKind.FUTURE_CHANGES):
        return isinstance(rec, ConcreteState) and rec.assigned == q.symbol
    return isinstance(rec, TransitionRecord) and rec.callee == q.symbol


def _matches(step, anchor: ObservationEvent, ev: ObservationEvent) -> bool:
    a, r = anchor.record, ev.record
    if step.op == "source":
        return isinstance(r, ConcreteState) and r.time == a.start
    if step.op == "dest":
        return isinstance(r, ConcreteState) and r.time == a.end
    if step.op == "incident":
        return isinstance(r, TransitionRecord) and r.end == a.time
    if step.op == "next_call":
        return isinstance(r, TransitionRecord) and r.callee == step.symbol and r.key > a.key
    if step.op == "next_change":
        return isinstance(r, ConcreteState) and r.assigned == step.symbol and r.key > a.key
    raise ValueError(step.op)


class MonitorPool:
    """All monitoring state for one formula and one plan."""

    def __init__(self, formula: CftlFormula, plan: InstrumentationPlan, optimised: bool = True):
        self.formula = formula
        self.plan = plan
        self.optimised = optimised
        self.cmap = ConfigurationMap()
        self.monitors: list = []
        self.timing: list = []
        self.last_seq = -1
        self.extended: set = set()  # runtime prefixes (event seq tuples) that grew
        self._log: dict = {}  # location -> events, in arrival order
        self._log_keys: dict = {}
        self._waiting: dict = {}  # location -> cursors
        self._prefixes: dict = {}  # (binding id, length) -> {seq tuple: _Prefix}
        self._sites: dict = {}
        for b in plan.bindings:
            for j, comp in enumerate(b.components):
                self._sites.setdefault(comp, []).append((b, j))
        self._roots = [formula.root_index(a) for a in formula.atoms]

    # bookkeeping

    def _timing(self, ev: Optional[ObservationEvent], cls: str, text: str) -> None:
        t = ev.stamp if ev is not None else Fraction(0)
        self.timing.append(TimingPoint(t, cls, text))

    def _record(self, ev: ObservationEvent) -> None:
        self._log.setdefault(ev.location, []).append(ev)
        self._log_keys.setdefault(ev.location, []).append(ev.key)

    def _register_prefix(self, m: RuntimeMonitor) -> None:
        n = len(m.elements)
        if n >= len(m.binding.components):
            return
        bucket = self._prefixes.setdefault((m.binding.id, n), {})
        bucket.setdefault(m.key, _Prefix(tuple(m.elements), m))

    # atom resolution

    def _lookup(self, step, anchor: ObservationEvent, locs) -> Optional[ObservationEvent]:
        best = None
        for loc in locs:
            events = self._log.get(loc, [])
            if step.op in ("next_call", "next_change"):
                start = bisect_right(self._log_keys[loc], anchor.key) if events else 0
                candidates = events[start:]
            else:
                candidates = events
            for ev in candidates:
                if _matches(step, anchor, ev):
                    if best is None or ev.key < best.key:
                        best = ev
                    break
        return best

    def _advance(self, m: RuntimeMonitor, ai: int, k: int, anchor: ObservationEvent, now) -> None:
        atom = self.formula.atoms[ai]
        steps = atom.sel.steps
        images = self.plan.images.get((m.binding.id, ai), [])
        while k < len(steps):
            locs = images[k] if k < len(images) else frozenset()
            found = self._lookup(steps[k], anchor, locs)
            if found is None:
                cursor = _Cursor(m, ai, k, anchor)
                for loc in locs:
                    self._waiting.setdefault(loc, []).append(cursor)
                return
            anchor = found
            k += 1
        rec = anchor.record
        if isinstance(atom, DurationIn):
            value = atom.holds(rec.duration)
        else:
            value = atom.holds(rec.value(atom.symbol))
        self._observe(m, ai, value, now)

    def _observe(self, m: RuntimeMonitor, ai: int, value: bool, now) -> None:
        if not m.live:
            return
        before = m.monitor.verdict
        m.monitor.observe(ai, value)
        self._timing(now, "monitor_updated", f"monitor {m.id} atom {ai} = {Verdict.of(value).symbol}")
        if before is Verdict.UNKNOWN and m.monitor.collapsed:
            self._collapse(m, now)

    def _collapse(self, m: RuntimeMonitor, now) -> None:
        m.collapse_seq = now.seq if now is not None else None
        self.cmap.store(m.binding.id, snapshot_configuration(m.monitor))
        self._timing(now, "verdict_reached", f"monitor {m.id} {m.monitor.verdict.symbol}")

    def _start_atoms(self, m: RuntimeMonitor, roots, now) -> None:
        for ai, r in enumerate(self._roots):
            if r in roots and m.live and m.monitor.observed[ai] is Verdict.UNKNOWN:
                self._advance(m, ai, 0, m.elements[r], now)

    def _new_monitor(self, b: StaticBinding, elements: list, base: Optional[RuntimeMonitor], now) -> RuntimeMonitor:
        j = len(elements) - 1
        if base is None:
            mon = Monitor(self.formula, optimised=self.optimised)
        else:
            later = [ai for ai, r in enumerate(self._roots) if r >= j]
            mon = instantiate_from(base.monitor.configuration(), later, self.formula, optimised=self.optimised)
        m = RuntimeMonitor(len(self.monitors), b, list(elements), mon)
        self.monitors.append(m)
        self._timing(now, "monitor_instantiated", f"monitor {m.id} for {m.describe()}")
        if mon.collapsed:
            self._collapse(m, now)
            self._register_prefix(m)
            return m
        self._register_prefix(m)
        # atoms of earlier variables that the configuration left undecided
        self._start_atoms(m, set(range(j)), now)
        self._start_atoms(m, {j}, now)
        return m

    # event handling

    def dispatch(self, ev: ObservationEvent) -> list:
        """Process one event; returns the timing points it produced."""
        if ev.seq <= self.last_seq:
            raise OutOfOrderEvent(f"event {ev.seq} after {self.last_seq}")
        self.last_seq = ev.seq
        mark = len(self.timing)
        self._record(ev)
        self._timing(ev, "state_change", f"{'state' if ev.is_state else 'transition'} at {ev.location}")

        pending = self._waiting.pop(ev.location, [])
        for cursor in pending:
            if cursor.done or not cursor.monitor.live:
                continue
            step = self.formula.atoms[cursor.atom].sel.steps[cursor.step]
            if _matches(step, cursor.anchor, ev):
                cursor.done = True
                self._advance(cursor.monitor, cursor.atom, cursor.step + 1, ev, ev)
            else:
                self._waiting.setdefault(ev.location, []).append(cursor)

        for b, j in self._sites.get(ev.location, []):
            q = self.formula.quantifiers[j]
            if not _in_domain(q, ev):
                continue
            if j == 0:
                self._new_monitor(b, [ev], None, ev)
                continue
            dep = self.formula.var_index(q.dep)
            for prefix in list(self._prefixes.get((b.id, j), {}).values()):
                if not ev.key > prefix.elements[dep].key:
                    continue
                self.extended.add(tuple(e.seq for e in prefix.elements))
                owner = prefix.origin
                if owner.live and len(owner.elements) == j:
                    owner.elements.append(ev)
                    self._timing(ev, "monitor_updated", f"monitor {owner.id} binds {q.var}")
                    self._register_prefix(owner)
                    self._start_atoms(owner, {j}, ev)
                else:
                    self._new_monitor(b, list(prefix.elements) + [ev], owner, ev)
        return self.timing[mark:]

    def finalize(self) -> VerdictReport:
        """Verdict once the run is over and every event has been dispatched."""
        results = []
        discarded = 0
        for m in self.monitors:
            partial = len(m.elements) < len(self.formula.quantifiers)
            if partial and m.key in self.extended:
                discarded += 1
                continue
            if partial and not m.monitor.collapsed:
                log.info("partial binding %s stays undecided", m.describe())
            results.append(BindingResult(m.describe(), m.binding.id, m.monitor.verdict, m.collapse_seq))
        verdicts = [r.verdict for r in results]
        if any(v is Verdict.FALSE for v in verdicts):
            overall = Verdict.FALSE
        elif all(v is Verdict.TRUE for v in verdicts):
            overall = Verdict.TRUE
        else:
            overall = Verdict.UNKNOWN
        return VerdictReport(overall, results, list(self.timing), len(self.monitors), discarded)


def dispatch(ev: ObservationEvent, pool: MonitorPool) -> list:
    return pool.dispatch(ev)


def finalize(pool: MonitorPool) -> VerdictReport:
    return pool.finalize()
