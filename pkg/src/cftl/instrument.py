"""Static instrumentation: binding spaces, instrumentation points and plans.

For every tuple of SCFG elements that could support a runtime binding, each
atom's selector chain is pushed through the graph statically.  The elements
reached are the program locations that have to be observed to decide the
atom for bindings supported by that tuple.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from cftl.formula import (
    CftlFormula,
    DomainKind,
    DurationIn,
    QuantifierDecl,
    Step,
)
from cftl.lang.syntax import Program
from cftl.scfg import (
    CALL,
    E,
    Element,
    ReachabilityMap,
    Scfg,
    V,
    build_scfg,
    is_before,
    reachability_map,
)


class MissingDependency(ValueError):
    pass


class UnrealizableAtom(Exception):
    """An atom's selector chain reaches no program location."""


TIMESTAMP = "timestamp"
DURATION = "duration"


def value_capture(symbol: str) -> str:
    return f"state_value:{symbol}"


def _calls(g: Scfg, e, fn: str) -> bool:
    return CALL in e.types and g.vertex(e.dst).called == fn


def _after(g: Scfg, dep: Element, el: Element, reach: Optional[ReachabilityMap]) -> bool:
    if reach is not None:
        return el in reach(dep)
    return is_before(g, dep, el)


def static_domain(
    g: Scfg,
    q: QuantifierDecl,
    dep: Optional[Element] = None,
    reach: Optional[ReachabilityMap] = None,
) -> frozenset:
    """Elements that can support a member of the quantification domain."""
    if q.kind.dependent and dep is None:
        raise MissingDependency(f"domain of {q.var} needs the element bound to {q.dep}")
    if q.kind is DomainKind.CHANGES:
        return frozenset(V(v.index) for v in g.vertices if v.assigned == q.symbol)
    if q.kind is DomainKind.CALLS:
        return frozenset(E(e.index) for e in g.edges if _calls(g, e, q.symbol))
    g.check(dep)
    if q.kind is DomainKind.FUTURE_CALLS:
        return frozenset(
            E(e.index) for e in g.edges if _calls(g, e, q.symbol) and _after(g, dep, E(e.index), reach)
        )
    # a change happens only when the assignment is executed, not on a loop revisit;
    # the destination of a bound transition is itself later than that transition
    return frozenset(
        V(v.index)
        for v in g.vertices
        if v.assigned == q.symbol
        and any(
            e.executing and (E(e.index) == dep or _after(g, dep, E(e.index), reach))
            for e in g.in_edges(v.index)
        )
    )


def static_next(g: Scfg, start: Element, target: tuple) -> frozenset:
    """First matching elements strictly after ``start`` along any walk.

    ``target`` is ``("call", f)`` or ``("change", x)``.
    """
    g.check(start)
    kind, symbol = target
    found = set()
    seen_edges = set()
    expanded = set()
    queue: deque = deque()

    def push_out(v: int) -> None:
        if v in expanded:
            return
        expanded.add(v)
        for e in g.out_edges(v):
            if e.index not in seen_edges:
                seen_edges.add(e.index)
                queue.append(e)

    def arrive(e) -> None:
        dst = g.vertex(e.dst)
        if kind == "change" and e.executing and dst.assigned == symbol:
            found.add(V(dst.index))
            return
        push_out(e.dst)

    if start.is_vertex:
        for e in g.out_edges(start.index):
            seen_edges.add(e.index)
            queue.append(e)
    else:
        arrive(g.edge(start.index))
    while queue:
        e = queue.popleft()
        if kind == "call" and _calls(g, e, symbol):
            found.add(E(e.index))
            continue
        arrive(e)
    return frozenset(found)


def apply_step(g: Scfg, step: Step, elements: frozenset) -> frozenset:
    """Static image of a set of elements under one selector step."""
    out = set()
    for el in elements:
        if step.op == "source":
            out.add(V(g.edge(el.index).src))
        elif step.op == "dest":
            out.add(V(g.edge(el.index).dst))
        elif step.op == "incident":
            out.update(E(e.index) for e in g.in_edges(el.index))
        elif step.op == "next_call":
            out |= static_next(g, el, ("call", step.symbol))
        elif step.op == "next_change":
            out |= static_next(g, el, ("change", step.symbol))
        else:
            raise ValueError(f"unknown selector step {step.op!r}")
    return frozenset(out)


@dataclass(frozen=True)
class StaticBinding:
    id: int
    components: tuple  # Elements, one per bound quantifier

    def to_json(self) -> dict:
        return {"id": self.id, "components": [c.to_json() for c in self.components]}

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.components) + ")"


@dataclass(frozen=True)
class BindingSpace:
    bindings: tuple
    formula_digest: str
    program_digest: str

    def __len__(self) -> int:
        return len(self.bindings)

    def __iter__(self):
        return iter(self.bindings)

    def tuples(self) -> set:
        return {b.components for b in self.bindings}


def compute_binding_space(
    f: CftlFormula,
    g: Scfg,
    r: Optional[ReachabilityMap] = None,
    program_digest: str = "",
) -> BindingSpace:
    """Enumerate symbolic-support tuples, recursing over the quantifiers.

    When a dependent domain is statically empty the shorter tuple is kept:
    bindings of that shape can never be extended at runtime, yet their
    monitors may still decide the body from the atoms already bound.
    """
    r = r if r is not None else reachability_map(g)
    n = len(f.quantifiers)
    found: list = []

    def rec(prefix: tuple) -> None:
        k = len(prefix)
        if k == n:
            found.append(prefix)
            return
        q = f.quantifiers[k]
        dep = prefix[f.var_index(q.dep)] if q.kind.dependent else None
        domain = static_domain(g, q, dep, r)
        if not domain:
            if k > 0:
                found.append(prefix)
            return
        for el in sorted(domain):
            rec(prefix + (el,))

    rec(())
    unique = list(dict.fromkeys(found))
    bindings = tuple(StaticBinding(i, comps) for i, comps in enumerate(unique))
    return BindingSpace(bindings, f.digest, program_digest)


@dataclass(frozen=True)
class InstrumentationPoint:
    id: int
    binding: int
    atom: Optional[int]  # None for a point that only marks where a variable binds
    step: int  # 0 = the bound element itself, k = after k selector steps
    location: Element
    capture: str
    derived_from: int
    minimal: bool = False

    @property
    def binds(self) -> bool:
        return self.step == 0

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "binding": self.binding,
            "atom": self.atom,
            "step": self.step,
            "location": self.location.to_json(),
            "capture": self.capture,
            "derived_from": self.derived_from,
            "minimal": self.minimal,
            "binds": self.binds,
        }


def _terminal_capture(atom) -> str:
    return DURATION if isinstance(atom, DurationIn) else value_capture(atom.symbol)


def instrumentation_points(f: CftlFormula, b: StaticBinding, g: Scfg) -> tuple:
    """Points for one static binding, plus the atoms whose chains die out.

    Returns ``(points, unrealizable_atom_indices)``; point ids and minimality
    are filled in later by :func:`emit_plan`.
    """
    points: list = []
    unrealizable: list = []
    for ai, atom in enumerate(f.atoms):
        r = f.root_index(atom)
        if r >= len(b.components):
            continue
        image = frozenset({b.components[r]})
        steps = atom.sel.steps
        if not steps:
            points.append(InstrumentationPoint(-1, b.id, ai, 0, b.components[r], _terminal_capture(atom), r))
            continue
        for k, step in enumerate(steps, start=1):
            image = apply_step(g, step, image)
            if not image:
                unrealizable.append(ai)
                break
            capture = _terminal_capture(atom) if k == len(steps) else TIMESTAMP
            for loc in sorted(image):
                points.append(InstrumentationPoint(-1, b.id, ai, k, loc, capture, r))
    for j, comp in enumerate(b.components):
        if not any(p.step == 0 and p.derived_from == j for p in points):
            points.append(InstrumentationPoint(-1, b.id, None, 0, comp, TIMESTAMP, j))
    return tuple(points), tuple(unrealizable)


def partition_and_minimals(points, f: CftlFormula, g: Scfg) -> tuple:
    """Group points by originating variable and mark before-minimal ones.

    Returns ``(partition, minimal)``: both map a variable index to a list of
    points.  Points on a common cycle are all minimal.
    """
    partition: dict = {}
    for p in points:
        partition.setdefault(p.derived_from, []).append(p)
    minimal: dict = {}
    for j, group in partition.items():
        locs = sorted({p.location for p in group})
        before = {(a, b): is_before(g, a, b) for a in locs for b in locs if a != b}
        mins = {
            loc
            for loc in locs
            if not any(before[(o, loc)] and not before[(loc, o)] for o in locs if o != loc)
        }
        minimal[j] = [p for p in group if p.location in mins]
    return partition, minimal


@dataclass
class InstrumentationPlan:
    program_digest: str
    formula_digest: str
    bindings: tuple
    points: tuple
    critical_symbols: frozenset
    unrealizable: tuple = ()  # (binding id, atom index)
    images: dict = field(default_factory=dict)  # (binding, atom) -> [frozenset per step]

    @property
    def locations(self) -> frozenset:
        return frozenset(p.location for p in self.points)

    def partitions(self) -> dict:
        out: dict = {}
        for p in self.points:
            out.setdefault(p.binding, {}).setdefault(p.derived_from, []).append(p.id)
        return out

    def minimal_points(self) -> dict:
        out: dict = {}
        for p in self.points:
            if p.minimal:
                out.setdefault(p.binding, {}).setdefault(p.derived_from, []).append(p.id)
        return out

    def to_json(self) -> dict:
        return {
            "program_digest": self.program_digest,
            "formula_digest": self.formula_digest,
            "critical_symbols": sorted(self.critical_symbols),
            "bindings": [b.to_json() for b in self.bindings],
            "points": [p.to_json() for p in self.points],
            "unrealizable": [{"binding": b, "atom": a} for b, a in self.unrealizable],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def emit_plan(
    program: Program,
    formula: CftlFormula,
    g: Optional[Scfg] = None,
    reach: Optional[ReachabilityMap] = None,
) -> InstrumentationPlan:
    g = g if g is not None else build_scfg(program)
    reach = reach if reach is not None else reachability_map(g)
    space = compute_binding_space(formula, g, reach, program.digest)
    all_points: list = []
    unrealizable: list = []
    images: dict = {}
    for b in space.bindings:
        pts, dead = instrumentation_points(formula, b, g)
        _, minimal = partition_and_minimals(pts, formula, g)
        min_ids = {id(p) for group in minimal.values() for p in group}
        pts = sorted(
            pts,
            key=lambda p: (p.derived_from, -1 if p.atom is None else p.atom, p.step, p.location),
        )
        for p in pts:
            all_points.append((p, id(p) in min_ids))
        unrealizable += [(b.id, a) for a in dead]
        for ai, atom in enumerate(formula.atoms):
            r = formula.root_index(atom)
            if r >= len(b.components):
                continue
            steps = [frozenset(x.location for x in pts if x.atom == ai and x.step == k)
                     for k in range(1, len(atom.sel.steps) + 1)]
            images[(b.id, ai)] = steps
    points = tuple(
        InstrumentationPoint(i, p.binding, p.atom, p.step, p.location, p.capture, p.derived_from, m)
        for i, (p, m) in enumerate(all_points)
    )
    return InstrumentationPlan(
        program.digest,
        formula.digest,
        space.bindings,
        points,
        formula.critical_symbols,
        tuple(unrealizable),
        images,
    )
