import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from cftl.formula import (
    And,
    DomainKind,
    DurationIn,
    FormulaSyntaxError,
    FormulaTypeError,
    Not,
    Or,
    Prop,
    StateEq,
    StateIn,
    UnboundVariable,
    arity,
    chain_length,
    cl,
    collect_atoms,
    composition_sequence,
    evaluate,
    l_cl,
    l_cl_m,
    normalize,
    parse_formula,
    parse_psi,
    render,
)
from cftl.truth import Verdict, kleene_and, kleene_or

from gen import DataSource, gen_formula, gen_psi

T, F, U = Verdict.TRUE, Verdict.FALSE, Verdict.UNKNOWN

EXAMPLE_1 = """
forall q in changes(database) .
  ( q(database) = 1 =>
      ( duration(next_call(q, database_operation)) in [0, 2]
        and duration(next_call(q, close_connection)) in [0, 1] ) )
"""


def closure_text(psi) -> str:
    return "{" + ", ".join(render(p) for p in cl(psi)) + "}"


# three-valued connectives


def test_kleene_tables():
    for a, b in itertools.product(Verdict, repeat=2):
        both = kleene_and([a, b])
        either = kleene_or([a, b])
        if F in (a, b):
            assert both is F
        elif a is T and b is T:
            assert both is T
        else:
            assert both is U
        if T in (a, b):
            assert either is T
        elif a is F and b is F:
            assert either is F
        else:
            assert either is U
    assert kleene_and([]) is T and kleene_or([]) is F
    assert U.negate() is U and T.negate() is F


# parsing and typing


def test_parse_example_one():
    f = parse_formula(EXAMPLE_1)
    assert [q.kind for q in f.quantifiers] == [DomainKind.CHANGES]
    assert f.critical_symbols == {"database", "database_operation", "close_connection"}
    assert len(f.atoms) == 3
    assert isinstance(f.atoms[0], StateEq) and f.atoms[0].value == 1
    assert isinstance(f.atoms[1], DurationIn) and f.atoms[1].hi == 2
    assert [s.op for s in f.atoms[1].sel.steps] == ["next_call"]


def test_dependent_quantifier():
    f = parse_formula("forall q in changes(a) . forall t in future_calls(q, g) . duration(t) in (0, 0.5)")
    q, t = f.quantifiers
    assert t.kind is DomainKind.FUTURE_CALLS and t.dep == "q" and t.symbol == "g"
    assert f.atoms[0].hi == Fraction(1, 2) and not f.atoms[0].closed
    assert f.root_index(f.atoms[0]) == 1


def test_unicode_operators():
    a = parse_formula("forall q in changes(x) . ¬(q(x) = 1) ∨ q(x) ∈ [0, 3]")
    b = parse_formula("forall q in changes(x) . not (q(x) = 1) or q(x) in [0, 3]")
    assert a.body == b.body


@pytest.mark.parametrize(
    "text, error",
    [
        ("forall q in future_calls(t, f) . q(x) = 1", FormulaTypeError),
        ("forall q in changes(x) . duration(source(q)) in [0, 1]", FormulaTypeError),
        ("forall t in calls(f) . duration(incident(t)) in [0, 1]", FormulaTypeError),
        ("forall q in changes(x) . t(x) = 1", UnboundVariable),
        ("forall q in changes(x) . q(x) in [2, 1]", FormulaTypeError),
        ("forall q in changes(x) . q(x) = ", FormulaSyntaxError),
        ("q(x) = 1", FormulaSyntaxError),
        ("forall q in everything(x) . q(x) = 1", FormulaSyntaxError),
        ("forall q in calls(f) . forall q in calls(g) . duration(q) in [0, 1]", FormulaSyntaxError),
        ("forall q in changes(x) . duration(q) in [0, 1]", FormulaTypeError),
    ],
)
def test_rejected_formulas(text, error):
    with pytest.raises(error):
        parse_formula(text)


def test_syntax_error_position():
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula("forall q in changes(x) .\n  q(x) = = 1")
    assert info.value.lineno == 2


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_render_parse_round_trip(data):
    f = parse_formula(gen_formula(DataSource(data)))
    again = parse_formula(f.text())
    assert again.body == f.body and again.quantifiers == f.quantifiers
    assert again.digest == f.digest


# normalization


def assignments(atoms):
    for bits in itertools.product([False, True], repeat=len(atoms)):
        yield dict(zip(atoms, bits))


def is_nnf(psi) -> bool:
    if isinstance(psi, Not):
        return isinstance(psi.arg, (Prop, StateEq, StateIn, DurationIn))
    if isinstance(psi, (And, Or)):
        return all(is_nnf(a) for a in psi.args)
    return True


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_normalize_preserves_truth_table(data):
    psi = parse_psi(gen_psi(DataSource(data)))
    nnf = normalize(psi)
    assert is_nnf(nnf)
    atoms = collect_atoms(psi)
    assert set(collect_atoms(nnf)) <= set(atoms)
    for alpha in assignments(atoms):
        v = lambda a: Verdict.of(alpha[a])
        assert evaluate(psi, v) is evaluate(nnf, v)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_kleene_evaluation_is_monotone(data):
    """Deciding more atoms never flips a decided verdict."""
    psi = normalize(parse_psi(gen_psi(DataSource(data))))
    atoms = collect_atoms(psi)
    partial = {a: data.draw(st.sampled_from([T, F, U])) for a in atoms}
    before = evaluate(psi, lambda a: partial[a])
    full = {a: (v if v is not U else data.draw(st.sampled_from([T, F]))) for a, v in partial.items()}
    after = evaluate(psi, lambda a: full[a])
    assert after is not U
    if before is not U:
        assert after is before


def test_implication_rewrites():
    assert normalize(parse_psi("p => q")) == Or((Not(Prop("p")), Prop("q")))
    assert render(normalize(parse_psi("not (p and (q or not r))"))) == "¬p ∨ (¬q ∧ r)"


# closures


def test_closure_example():
    assert closure_text(parse_psi("(p and q) or r")) == "{(p ∧ q) ∨ r, p ∧ q, p, q, r}"


def test_closure_of_implication():
    f = parse_formula(
        "forall s in changes(x) . s(x) in (0, 10) => duration(next_call(s, alpha)) in (0, 100)"
    )
    a, b = f.atoms
    assert set(cl(f.body)) == {f.body, Not(a), a, b}


def test_limited_closures():
    psi = parse_psi("(p or p) and q")
    assert l_cl(psi) == (Or((Prop("p"), Prop("p"))), Prop("q"))
    assert l_cl(psi.args[0]) == (Prop("p"),)
    assert sum(l_cl_m(psi.args[0]).values()) == 2
    assert l_cl(Prop("p")) == ()
    assert arity(parse_psi("p and q and r")) == 3
    assert chain_length(parse_psi("(p and q) or r")) == 3


def test_composition_sequences():
    f = parse_formula(EXAMPLE_1)
    assert [composition_sequence(a).render() for a in f.atoms] == [
        "⟨q(database) = 1⟩",
        "⟨next_Δτ(q, database_operation), d(·) ∈ [0, 2]⟩",
        "⟨next_Δτ(q, close_connection), d(·) ∈ [0, 1]⟩",
    ]
    g = parse_formula("forall q in changes(a) . forall t in future_calls(q, g) . dest(t)(a) = 1")
    assert composition_sequence(g.atoms[0]).render() == "⟨dest(t), ·(a) = 1⟩"


def test_atom_predicates():
    eq = StateEq(None, "x", Fraction(1))
    assert eq.holds(1) and not eq.holds(2) and not eq.holds("1")
    interval = DurationIn(None, Fraction(0), Fraction(1), closed=False)
    assert interval.holds(Fraction(1, 2)) and not interval.holds(0) and not interval.holds(1)
