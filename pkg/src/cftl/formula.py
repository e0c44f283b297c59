"""CFTL formulas: surface syntax, typing, normal form, atoms and closures.

A formula is a sequence of universal quantifiers over states or transitions
followed by a propositional body over timing and value atoms::

    forall q in changes(x) . forall t in future_calls(q, f) .
        ( q(x) = 1 => duration(t) in [0, 1] )
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterator, Optional, Union

from cftl.lang.interpreter import is_number
from cftl.lang.syntax import format_number
from cftl.truth import Verdict, kleene_and, kleene_or


class FormulaSyntaxError(SyntaxError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})" if line else message)
        self.msg = message
        self.lineno = line
        self.offset = column


class FormulaTypeError(TypeError):
    """A selector was applied to a position of the wrong sort."""


class UnboundVariable(NameError):
    pass


STATE = "state"
TRANSITION = "transition"


class DomainKind(Enum):
    CHANGES = "changes"
    CALLS = "calls"
    FUTURE_CALLS = "future_calls"
    FUTURE_CHANGES = "future_changes"

    @property
    def sort(self) -> str:
        return STATE if self in (DomainKind.CHANGES, DomainKind.FUTURE_CHANGES) else TRANSITION

    @property
    def dependent(self) -> bool:
        return self in (DomainKind.FUTURE_CALLS, DomainKind.FUTURE_CHANGES)


@dataclass(frozen=True)
class QuantifierDecl:
    var: str
    kind: DomainKind
    symbol: str
    dep: Optional[str] = None

    @property
    def sort(self) -> str:
        return self.kind.sort

    def text(self) -> str:
        args = f"{self.dep}, {self.symbol}" if self.dep else self.symbol
        return f"forall {self.var} in {self.kind.value}({args})"


# selectors


STEP_SORTS = {
    # op: (argument sort, result sort)
    "source": (TRANSITION, STATE),
    "dest": (TRANSITION, STATE),
    "incident": (STATE, TRANSITION),
    "next_call": (None, TRANSITION),
    "next_change": (None, STATE),
}


@dataclass(frozen=True)
class Step:
    op: str
    symbol: Optional[str] = None

    def render(self, inner: str) -> str:
        if self.symbol is None:
            return f"{self.op}({inner})"
        return f"{self.op}({inner}, {self.symbol})"

    def math(self, inner: str) -> str:
        names = {"next_call": "next_Δτ", "next_change": "next_τ"}
        name = names.get(self.op, self.op)
        return f"{name}({inner}, {self.symbol})" if self.symbol else f"{name}({inner})"


@dataclass(frozen=True)
class Selector:
    root: str
    steps: tuple = ()

    def text(self) -> str:
        out = self.root
        for s in self.steps:
            out = s.render(out)
        return out


# atoms


def _num(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else format_number(v)


def _interval(lo: Fraction, hi: Fraction, closed: bool) -> str:
    lb, rb = ("[", "]") if closed else ("(", ")")
    return f"{lb}{_num(lo)}, {_num(hi)}{rb}"


def _in(value, lo, hi, closed) -> bool:
    return lo <= value <= hi if closed else lo < value < hi


@dataclass(frozen=True)
class StateEq:
    sel: Selector
    symbol: str
    value: Fraction

    capture = "state_value"

    def text(self) -> str:
        return f"{self.sel.text()}({self.symbol}) = {_num(self.value)}"

    def holds(self, observed) -> bool:
        return is_number(observed) and observed == self.value


@dataclass(frozen=True)
class StateIn:
    sel: Selector
    symbol: str
    lo: Fraction
    hi: Fraction
    closed: bool

    capture = "state_value"

    def text(self) -> str:
        return f"{self.sel.text()}({self.symbol}) in {_interval(self.lo, self.hi, self.closed)}"

    def holds(self, observed) -> bool:
        return is_number(observed) and _in(observed, self.lo, self.hi, self.closed)


@dataclass(frozen=True)
class DurationIn:
    sel: Selector
    lo: Fraction
    hi: Fraction
    closed: bool

    capture = "duration"
    symbol = None

    def text(self) -> str:
        return f"duration({self.sel.text()}) in {_interval(self.lo, self.hi, self.closed)}"

    def holds(self, observed) -> bool:
        return is_number(observed) and _in(observed, self.lo, self.hi, self.closed)


@dataclass(frozen=True)
class Prop:
    """Propositional letter, used when working with plain propositional bodies."""

    name: str

    def text(self) -> str:
        return self.name


Atom = Union[StateEq, StateIn, DurationIn, Prop]
ATOM_TYPES = (StateEq, StateIn, DurationIn, Prop)


# propositional structure


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bottom:
    pass


@dataclass(frozen=True)
class Not:
    arg: "Psi"


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


Psi = Union[Top, Bottom, Not, And, Or, StateEq, StateIn, DurationIn, Prop]


def is_atom(psi) -> bool:
    return isinstance(psi, ATOM_TYPES)


def is_literal(psi) -> bool:
    return is_atom(psi) or (isinstance(psi, Not) and is_atom(psi.arg))


def normalize(psi: Psi) -> Psi:
    """Negation normal form by De Morgan; operand lists are left as they are."""
    return _nnf(psi, True)


def _nnf(psi: Psi, positive: bool) -> Psi:
    if isinstance(psi, Top):
        return psi if positive else Bottom()
    if isinstance(psi, Bottom):
        return psi if positive else Top()
    if is_atom(psi):
        return psi if positive else Not(psi)
    if isinstance(psi, Not):
        return _nnf(psi.arg, not positive)
    if isinstance(psi, And):
        args = tuple(_nnf(a, positive) for a in psi.args)
        return And(args) if positive else Or(args)
    if isinstance(psi, Or):
        args = tuple(_nnf(a, positive) for a in psi.args)
        return Or(args) if positive else And(args)
    raise TypeError(f"not a formula: {psi!r}")


def iter_atoms(psi: Psi) -> Iterator[Atom]:
    if is_atom(psi):
        yield psi
    elif isinstance(psi, Not):
        yield from iter_atoms(psi.arg)
    elif isinstance(psi, (And, Or)):
        for a in psi.args:
            yield from iter_atoms(a)


def collect_atoms(psi: Psi) -> tuple:
    """Distinct atoms in first-occurrence order."""
    return tuple(dict.fromkeys(iter_atoms(psi)))


def evaluate(psi: Psi, valuation) -> Verdict:
    """Kleene evaluation; ``valuation(atom)`` returns a Verdict."""
    if isinstance(psi, Top):
        return Verdict.TRUE
    if isinstance(psi, Bottom):
        return Verdict.FALSE
    if is_atom(psi):
        return valuation(psi)
    if isinstance(psi, Not):
        return evaluate(psi.arg, valuation).negate()
    if isinstance(psi, And):
        return kleene_and(evaluate(a, valuation) for a in psi.args)
    if isinstance(psi, Or):
        return kleene_or(evaluate(a, valuation) for a in psi.args)
    raise TypeError(f"not a formula: {psi!r}")


# closures


def direct_subformulas(psi: Psi) -> tuple:
    """Operands of a conjunction or disjunction; literals have none."""
    if isinstance(psi, (And, Or)):
        return psi.args
    return ()


def cl(psi: Psi) -> tuple:
    """All subformulas, pre-order, without repetition."""
    out: dict = {}

    def walk(p):
        out.setdefault(p, None)
        if isinstance(p, Not):
            walk(p.arg)
        for a in direct_subformulas(p):
            walk(a)

    walk(psi)
    return tuple(out)


def l_cl(psi: Psi) -> tuple:
    return tuple(dict.fromkeys(direct_subformulas(psi)))


def l_cl_m(psi: Psi) -> Counter:
    return Counter(direct_subformulas(psi))


def arity(psi: Psi) -> int:
    """Largest operand count over the closure."""
    return max((sum(l_cl_m(p).values()) for p in cl(psi)), default=0)


def chain_length(psi: Psi) -> int:
    """Number of formulas on the longest strict-subformula chain ending at ``psi``."""
    subs = direct_subformulas(psi)
    return 1 + max((chain_length(a) for a in subs), default=0)


# rendering


def render(psi: Psi, ascii_ops: bool = False) -> str:
    """Render with connective symbols; ``ascii_ops`` gives the parseable form."""
    if ascii_ops:
        ops = {"and": " and ", "or": " or ", "not": "not ", "top": "true", "bottom": "false"}
    else:
        ops = {"and": " ∧ ", "or": " ∨ ", "not": "¬", "top": "⊤", "bottom": "⊥"}

    def go(p, nested: bool) -> str:
        if isinstance(p, Top):
            return ops["top"]
        if isinstance(p, Bottom):
            return ops["bottom"]
        if is_atom(p):
            return p.text()
        if isinstance(p, Not):
            inner = go(p.arg, True)
            wrap = not is_literal(p) or (ascii_ops and not isinstance(p.arg, Prop))
            if wrap and not inner.startswith("("):
                inner = f"({inner})"
            return ops["not"] + inner
        joiner = ops["and"] if isinstance(p, And) else ops["or"]
        text = joiner.join(go(a, True) for a in p.args)
        return f"({text})" if nested else text

    return go(psi, False)


# whole formulas


@dataclass(frozen=True)
class CftlFormula:
    quantifiers: tuple
    body: Psi
    atoms: tuple
    critical_symbols: frozenset

    @classmethod
    def build(cls, quantifiers, body: Psi) -> "CftlFormula":
        quantifiers = tuple(quantifiers)
        _check_quantifiers(quantifiers)
        body = normalize(body)
        sorts = {q.var: q.sort for q in quantifiers}
        atoms = collect_atoms(body)
        for a in atoms:
            if isinstance(a, Prop):
                raise FormulaTypeError(f"bare proposition {a.name!r} in a quantified formula")
            _selector_sort(a.sel, sorts)
            if isinstance(a, DurationIn) and _selector_sort(a.sel, sorts) != TRANSITION:
                raise FormulaTypeError(f"duration() needs a transition: {a.text()}")
            if isinstance(a, (StateEq, StateIn)) and _selector_sort(a.sel, sorts) != STATE:
                raise FormulaTypeError(f"value lookup needs a state: {a.text()}")
            if isinstance(a, (StateIn, DurationIn)) and a.lo > a.hi:
                raise FormulaTypeError(f"empty interval in {a.text()}")
        symbols = {q.symbol for q in quantifiers}
        for a in atoms:
            if a.symbol is not None:
                symbols.add(a.symbol)
            symbols.update(s.symbol for s in a.sel.steps if s.symbol)
        return cls(quantifiers, body, atoms, frozenset(symbols))

    def var_index(self, var: str) -> int:
        for i, q in enumerate(self.quantifiers):
            if q.var == var:
                return i
        raise UnboundVariable(var)

    def atom_index(self, atom: Atom) -> int:
        return self.atoms.index(atom)

    def root_index(self, atom: Atom) -> int:
        return self.var_index(atom.sel.root)

    def text(self) -> str:
        prefix = " . ".join(q.text() for q in self.quantifiers)
        return f"{prefix} . ( {render(self.body, ascii_ops=True)} )"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()

    def __str__(self) -> str:
        return self.text()


def _check_quantifiers(quantifiers: tuple) -> None:
    if not quantifiers:
        raise FormulaSyntaxError("a formula needs at least one quantifier")
    seen = []
    for i, q in enumerate(quantifiers):
        if q.var in seen:
            raise FormulaSyntaxError(f"bind variable {q.var!r} declared twice")
        if i == 0 and q.kind.dependent:
            raise FormulaTypeError("the first quantification domain must be independent")
        if i > 0 and not q.kind.dependent:
            raise FormulaTypeError(f"domain of {q.var!r} must depend on an earlier variable")
        if q.kind.dependent and q.dep not in seen:
            raise UnboundVariable(f"{q.dep!r} is not an earlier bind variable")
        seen.append(q.var)


def _selector_sort(sel: Selector, sorts: dict) -> str:
    if sel.root not in sorts:
        raise UnboundVariable(sel.root)
    sort = sorts[sel.root]
    for step in sel.steps:
        want, result = STEP_SORTS[step.op]
        if want is not None and want != sort:
            raise FormulaTypeError(f"{step.op}() applied to a {sort} in {sel.text()}")
        sort = result
    return sort


# composition sequences


@dataclass(frozen=True)
class CompositionSequence:
    root: str
    maps: tuple  # Steps applied left to right
    predicate: Atom

    def render(self) -> str:
        parts = []
        inner = self.root
        for s in self.maps:
            parts.append(s.math(inner))
            inner = "·"
        a = self.predicate
        if isinstance(a, DurationIn):
            parts.append(f"d({inner}) ∈ {_interval(a.lo, a.hi, a.closed)}")
        elif isinstance(a, StateIn):
            parts.append(f"{inner}({a.symbol}) ∈ {_interval(a.lo, a.hi, a.closed)}")
        elif isinstance(a, StateEq):
            parts.append(f"{inner}({a.symbol}) = {_num(a.value)}")
        return "⟨" + ", ".join(parts) + "⟩"


def composition_sequence(atom: Atom) -> CompositionSequence:
    return CompositionSequence(atom.sel.root, atom.sel.steps, atom)


# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>-?\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>=>|∧|∨|¬|⇒|∈|[()\[\],.=])
    """,
    re.VERBOSE,
)
KEYWORDS = {"forall", "in", "and", "or", "not", "true", "false", "duration"}
SELECTOR_OPS = {"source", "dest", "incident", "next_call", "next_change"}
UNICODE_OPS = {"∧": "and", "∨": "or", "¬": "not", "⇒": "=>", "∈": "in"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            value = m.group()
            if kind == "op" and value in UNICODE_OPS:
                value = UNICODE_OPS[value]
                kind = "name" if value != "=>" else "op"
            toks.append(_Tok(kind, value, line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("end", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, allow_props: bool):
        self.toks = _lex(text)
        self.pos = 0
        self.allow_props = allow_props

    @property
    def cur(self) -> _Tok:
        return self.toks[self.pos]

    def error(self, message: str):
        raise FormulaSyntaxError(message, self.cur.line, self.cur.col)

    def at(self, text: str) -> bool:
        return self.cur.text == text and self.cur.kind in ("name", "op")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            self.error(f"expected {text!r}, found {self.cur.text or 'end of input'!r}")

    def name(self) -> str:
        tok = self.cur
        if tok.kind != "name" or tok.text in KEYWORDS:
            self.error(f"expected an identifier, found {tok.text or 'end of input'!r}")
        self.pos += 1
        return tok.text

    def number(self) -> Fraction:
        tok = self.cur
        if tok.kind != "num":
            self.error(f"expected a number, found {tok.text or 'end of input'!r}")
        self.pos += 1
        return Fraction(tok.text)

    def formula(self) -> tuple:
        quantifiers = []
        while self.accept("forall"):
            var = self.name()
            self.expect("in")
            kind_tok = self.cur
            kind_name = self.name()
            try:
                kind = DomainKind(kind_name)
            except ValueError:
                raise FormulaSyntaxError(f"unknown domain {kind_name!r}", kind_tok.line, kind_tok.col) from None
            self.expect("(")
            if kind.dependent:
                dep = self.name()
                self.expect(",")
                symbol = self.name()
            else:
                dep, symbol = None, self.name()
            self.expect(")")
            self.expect(".")
            quantifiers.append(QuantifierDecl(var, kind, symbol, dep))
        if not quantifiers:
            self.error("expected 'forall'")
        body = self.implication()
        if self.cur.kind != "end":
            self.error(f"unexpected {self.cur.text!r}")
        return tuple(quantifiers), body

    def body_only(self) -> Psi:
        body = self.implication()
        if self.cur.kind != "end":
            self.error(f"unexpected {self.cur.text!r}")
        return body

    def implication(self) -> Psi:
        left = self.disjunction()
        if self.accept("=>"):
            right = self.implication()
            return Or((Not(left), right))
        return left

    def disjunction(self) -> Psi:
        args = [self.conjunction()]
        while self.accept("or"):
            args.append(self.conjunction())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conjunction(self) -> Psi:
        args = [self.negation()]
        while self.accept("and"):
            args.append(self.negation())
        return args[0] if len(args) == 1 else And(tuple(args))

    def negation(self) -> Psi:
        if self.accept("not"):
            return Not(self.negation())
        return self.primary()

    def primary(self) -> Psi:
        if self.accept("("):
            inner = self.implication()
            self.expect(")")
            return inner
        if self.accept("true"):
            return Top()
        if self.accept("false"):
            return Bottom()
        if self.accept("duration"):
            self.expect("(")
            sel = self.selector()
            self.expect(")")
            self.expect("in")
            lo, hi, closed = self.interval()
            return DurationIn(sel, lo, hi, closed)
        start = self.pos
        if self.cur.kind == "name" and self.toks[self.pos + 1].text != "(" and self.allow_props:
            return Prop(self.name())
        sel = self.selector()
        if start == self.pos:
            self.error("expected an atom")
        self.expect("(")
        symbol = self.name()
        self.expect(")")
        if self.accept("="):
            return StateEq(sel, symbol, self.number())
        if self.accept("in"):
            lo, hi, closed = self.interval()
            return StateIn(sel, symbol, lo, hi, closed)
        self.error("expected '=' or 'in' after a value lookup")

    def selector(self) -> Selector:
        tok = self.cur
        name = self.name()
        if name in SELECTOR_OPS and self.at("("):
            self.expect("(")
            inner = self.selector()
            symbol = None
            if name in ("next_call", "next_change"):
                self.expect(",")
                symbol = self.name()
            self.expect(")")
            return Selector(inner.root, inner.steps + (Step(name, symbol),))
        if name in SELECTOR_OPS:
            raise FormulaSyntaxError(f"{name} needs an argument", tok.line, tok.col)
        return Selector(name)

    def interval(self) -> tuple:
        if self.accept("["):
            closed, close = True, "]"
        elif self.accept("("):
            closed, close = False, ")"
        else:
            self.error("expected an interval")
        lo = self.number()
        self.expect(",")
        hi = self.number()
        self.expect(close)
        return lo, hi, closed


def parse_formula(text: str) -> CftlFormula:
    """Parse, type-check and normalize a CFTL formula."""
    quantifiers, body = _Parser(text, allow_props=False).formula()
    return CftlFormula.build(quantifiers, body)


def parse_psi(text: str) -> Psi:
    """Parse a propositional body over bare letters (not normalized)."""
    return _Parser(text, allow_props=True).body_only()
