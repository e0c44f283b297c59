"""Symbolic control-flow graphs.

Each state-inducing statement (assignment, call, assignment from a call) gets
one vertex holding a symbolic state: a total map from program symbols to
changed / unchanged / undefined / called.  Edges carry the branch condition
under which they are taken and the types of the statement they lead into.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from cftl.lang.syntax import (
    Assign,
    AssignCall,
    Call,
    If,
    Loop,
    Pass,
    Program,
    iter_statements,
    loop_condition_text,
    render_expr,
)


class Sym(Enum):
    CHANGED = "changed"
    UNCHANGED = "unchanged"
    UNDEFINED = "undefined"
    CALLED = "called"


CALL = "call"
ASSIGNMENT = "assignment"
CONTROL_FLOW = "control_flow"
EXECUTING_TYPES = frozenset({CALL, ASSIGNMENT})


class UnknownElement(KeyError):
    pass


@dataclass(frozen=True, order=True)
class Element:
    """A vertex or an edge of an SCFG, addressed by index."""

    kind: str  # "vertex" | "edge"
    index: int

    def __str__(self) -> str:
        return f"{'v' if self.kind == 'vertex' else 'e'}{self.index}"

    @property
    def is_vertex(self) -> bool:
        return self.kind == "vertex"

    def to_json(self) -> dict:
        return {"kind": self.kind, "index": self.index}

    @classmethod
    def from_json(cls, data: dict) -> "Element":
        return cls(data["kind"], int(data["index"]))


def V(i: int) -> Element:
    return Element("vertex", i)


def E(i: int) -> Element:
    return Element("edge", i)


@dataclass(frozen=True)
class SymbolicState:
    index: int
    mapping: tuple  # sorted ((symbol, Sym), ...)
    assigned: Optional[str] = None
    called: Optional[str] = None
    sid: Optional[int] = None

    def __getitem__(self, symbol: str) -> Sym:
        for s, v in self.mapping:
            if s == symbol:
                return v
        raise KeyError(symbol)

    def as_dict(self) -> dict:
        return dict(self.mapping)

    def label(self) -> str:
        parts = [f"{s}:{v.value}" for s, v in self.mapping if v in (Sym.CHANGED, Sym.CALLED)]
        return ", ".join(parts) if parts else "ε" if self.sid is None and self.index == 0 else "-"


@dataclass(frozen=True)
class ScfgEdge:
    index: int
    src: int
    condition: Optional[str]
    types: frozenset
    dst: int

    @property
    def executing(self) -> bool:
        """Traversing this edge executes the statement of its destination."""
        return bool(self.types & EXECUTING_TYPES)


@dataclass
class Scfg:
    vertices: list
    edges: list
    start: int
    ends: frozenset
    variables: frozenset
    functions: frozenset
    vertex_of_stmt: dict = field(default_factory=dict)
    exit_vertex: Optional[int] = None

    def __post_init__(self):
        self._out = {v.index: [] for v in self.vertices}
        self._in = {v.index: [] for v in self.vertices}
        self.edge_between = {}
        for e in self.edges:
            self._out[e.src].append(e)
            self._in[e.dst].append(e)
            self.edge_between[(e.src, e.dst)] = e

    def out_edges(self, v: int) -> list:
        return self._out[v]

    def in_edges(self, v: int) -> list:
        return self._in[v]

    def vertex(self, i: int) -> SymbolicState:
        return self.vertices[i]

    def edge(self, i: int) -> ScfgEdge:
        return self.edges[i]

    def check(self, el: Element) -> Element:
        pool = self.vertices if el.is_vertex else self.edges
        if el.kind not in ("vertex", "edge") or not 0 <= el.index < len(pool):
            raise UnknownElement(str(el))
        return el

    def elements(self) -> list:
        return [V(v.index) for v in self.vertices] + [E(e.index) for e in self.edges]

    def successors(self, el: Element) -> list:
        """Successors in the alternating vertex/edge walk graph."""
        if el.is_vertex:
            return [E(e.index) for e in self._out[el.index]]
        return [V(self.edges[el.index].dst)]

    def callee_of(self, e: ScfgEdge) -> Optional[str]:
        if CALL in e.types:
            return self.vertices[e.dst].called
        return None


# construction


def _and(a: Optional[str], b: Optional[str]) -> Optional[str]:
    if a is None:
        return b
    if b is None:
        return a
    wrap = lambda c: f"({c})" if " or " in c else c  # noqa: E731
    return f"{wrap(a)} and {wrap(b)}"


def _or(a: Optional[str], b: Optional[str]) -> Optional[str]:
    if a is None or b is None:
        return None
    if a == b:
        return a
    return f"({a}) or ({b})"


def _not(c: str) -> str:
    return f"not ({c})"


@dataclass(frozen=True)
class _Loose:
    vertex: int
    cond: Optional[str]
    extra: frozenset


def _merge(ends: Iterable[_Loose]) -> list:
    merged: dict = {}
    for end in ends:
        if end.vertex in merged:
            prev = merged[end.vertex]
            merged[end.vertex] = _Loose(end.vertex, _or(prev.cond, end.cond), prev.extra | end.extra)
        else:
            merged[end.vertex] = end
    return list(merged.values())


def _is_pure_pass(block) -> bool:
    return all(isinstance(s, Pass) for s in block)


class _Builder:
    def __init__(self, program: Program):
        self.variables = set()
        self.functions = set()
        for s in iter_statements(program.body):
            if isinstance(s, (Assign, AssignCall)):
                self.variables.add(s.target)
            if isinstance(s, (Call, AssignCall)):
                self.functions.add(s.callee)
            if isinstance(s, Loop) and s.var is not None:
                self.variables.add(s.var)
        self.symbols = sorted(self.variables | self.functions)
        self.vertices = [SymbolicState(0, tuple((s, Sym.UNDEFINED) for s in self.symbols))]
        self.edges: dict = {}
        self.vertex_of_stmt: dict = {}

    def _add_edge(self, src: int, cond: Optional[str], types: frozenset, dst: int) -> None:
        key = (src, dst)
        if key in self.edges:
            c, t = self.edges[key]
            self.edges[key] = (_or(c, cond), t | types)
        else:
            self.edges[key] = (cond, types)

    def _new_vertex(self, preds: list, assigned=None, called=None, sid=None) -> int:
        joined = {}
        for s in self.symbols:
            vals = [self.vertices[p][s] for p in preds]
            joined[s] = Sym.UNDEFINED if all(v is Sym.UNDEFINED for v in vals) else Sym.UNCHANGED
        if assigned is not None:
            joined[assigned] = Sym.CHANGED
        if called is not None:
            for s in self.variables:
                joined[s] = Sym.CHANGED
            joined[called] = Sym.CALLED
        idx = len(self.vertices)
        self.vertices.append(
            SymbolicState(idx, tuple((s, joined[s]) for s in self.symbols), assigned, called, sid)
        )
        return idx

    def block(self, stmts, ends: list) -> list:
        for s in stmts:
            ends = self.stmt(s, ends)
        return ends

    def stmt(self, s, ends: list) -> list:
        if isinstance(s, Pass):
            return ends
        if isinstance(s, (Assign, Call, AssignCall)):
            assigned = s.target if isinstance(s, (Assign, AssignCall)) else None
            called = s.callee if isinstance(s, (Call, AssignCall)) else None
            stype = frozenset(t for t, on in ((CALL, called), (ASSIGNMENT, assigned)) if on)
            v = self._new_vertex([e.vertex for e in ends], assigned, called, s.sid)
            self.vertex_of_stmt[s.sid] = v
            for e in ends:
                self._add_edge(e.vertex, e.cond, stype | e.extra, v)
            return [_Loose(v, None, frozenset())]
        if isinstance(s, If):
            out = []
            negs: list = []
            for cond, sub in s.branches:
                ctext = render_expr(cond)
                guard = None
                for n in negs + [ctext]:
                    guard = _and(guard, n)
                entry = [_Loose(e.vertex, _and(e.cond, guard), e.extra) for e in ends]
                out += self._branch(sub, entry)
                negs.append(_not(ctext))
            guard = None
            for n in negs:
                guard = _and(guard, n)
            entry = [_Loose(e.vertex, _and(e.cond, guard), e.extra) for e in ends]
            out += self._branch(s.orelse or (), entry)
            return _merge(out)
        if isinstance(s, Loop):
            heads = []
            for e in ends:
                if e.vertex not in heads:
                    heads.append(e.vertex)
            phi = loop_condition_text(s)
            entry = [_Loose(e.vertex, _and(e.cond, phi), e.extra) for e in ends]
            body_ends = self.block(s.body, entry)
            for b in body_ends:
                if b.vertex in heads:
                    continue
                for h in heads:
                    self._add_edge(b.vertex, b.cond, b.extra | {CONTROL_FLOW}, h)
            exits = [_Loose(e.vertex, _and(e.cond, _not(phi)), e.extra | {CONTROL_FLOW}) for e in ends]
            return _merge(exits)
        raise TypeError(f"not a statement: {s!r}")

    def _branch(self, block, entry: list) -> list:
        if _is_pure_pass(block):
            return [_Loose(e.vertex, e.cond, e.extra | {CONTROL_FLOW}) for e in entry]
        return self.block(block, entry)


def build_scfg(program: Program) -> Scfg:
    """Build the SCFG of a program; deterministic in the program text."""
    b = _Builder(program)
    ends = _merge(b.block(program.body, [_Loose(0, None, frozenset())]))
    exit_vertex = None
    if len(ends) == 1:
        final = frozenset({ends[0].vertex})
    else:
        exit_vertex = b._new_vertex([e.vertex for e in ends])
        for e in ends:
            b._add_edge(e.vertex, e.cond, e.extra | {CONTROL_FLOW}, exit_vertex)
        final = frozenset({exit_vertex})
    edges = [
        ScfgEdge(i, src, cond, frozenset(types), dst)
        for i, ((src, dst), (cond, types)) in enumerate(b.edges.items())
    ]
    return Scfg(
        vertices=b.vertices,
        edges=edges,
        start=0,
        ends=final,
        variables=frozenset(b.variables),
        functions=frozenset(b.functions),
        vertex_of_stmt=b.vertex_of_stmt,
        exit_vertex=exit_vertex,
    )


# ordering and reachability


def _reach(g: Scfg, start: Element) -> frozenset:
    seen = set()
    stack = list(g.successors(start))
    while stack:
        el = stack.pop()
        if el in seen:
            continue
        seen.add(el)
        stack.extend(g.successors(el))
    return frozenset(seen)


def is_before(g: Scfg, a: Element, b: Element) -> bool:
    """True iff ``b`` occurs strictly later than ``a`` on some walk of ``g``."""
    g.check(a)
    g.check(b)
    seen = set()
    queue = deque(g.successors(a))
    while queue:
        el = queue.popleft()
        if el == b:
            return True
        if el in seen:
            continue
        seen.add(el)
        queue.extend(g.successors(el))
    return False


@dataclass(frozen=True)
class ReachabilityMap:
    from_vertex: dict
    from_edge: dict

    def __call__(self, el: Element) -> frozenset:
        return (self.from_vertex if el.is_vertex else self.from_edge)[el.index]


def reachability_map(g: Scfg) -> ReachabilityMap:
    return ReachabilityMap(
        {v.index: _reach(g, V(v.index)) for v in g.vertices},
        {e.index: _reach(g, E(e.index)) for e in g.edges},
    )


def to_dot(g: Scfg) -> str:
    lines = ["digraph scfg {", "  node [shape=box];"]
    for v in g.vertices:
        extra = " peripheries=2" if v.index in g.ends else ""
        lines.append(f'  v{v.index} [label="{v.index}: {_esc(v.label())}"{extra}];')
    for e in g.edges:
        cond = e.condition if e.condition is not None else "true"
        types = ", ".join(sorted(e.types))
        lines.append(f'  v{e.src} -> v{e.dst} [label="[{_esc(cond)}] {{{types}}}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _esc(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')
