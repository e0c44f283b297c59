import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from cftl.formula import arity, chain_length, collect_atoms, evaluate, normalize, parse_formula, parse_psi, render
from cftl.monitor import (
    ConfigurationMap,
    Monitor,
    NotCollapsed,
    UnknownAtom,
    build_tree,
    check,
    closure_map,
    closure_size_bound,
    instantiate_from,
    optimised_check,
    snapshot_configuration,
)
from cftl.truth import Verdict

from gen import DataSource, gen_psi

T, F, U = Verdict.TRUE, Verdict.FALSE, Verdict.UNKNOWN


def trees(text):
    psi = normalize(parse_psi(text))
    atoms = collect_atoms(psi)
    plain = build_tree(psi, atoms)
    fast = build_tree(psi, atoms)
    return psi, atoms, plain, fast, closure_map(fast)


def closure_lines(text):
    psi = normalize(parse_psi(text))
    atoms = collect_atoms(psi)
    tree = build_tree(psi, atoms)
    names = lambda i: render(atoms[i])
    rendered = closure_map(tree).render(names, range(len(atoms)))
    return {k: "∅" if not v else "{" + ", ".join(v) + "}" for k, v in rendered.items()}


def test_closure_map_example():
    lines = closure_lines("(p or q) and (p or not r)")
    assert f"M(p) = {lines['p']}" == "M(p) = {p ∨ q, p ∨ ¬r}"
    assert f"M(r) = {lines['r']}" == "M(r) = ∅"
    assert f"M(¬r) = {lines['¬r']}" == "M(¬r) = {p ∨ ¬r}"
    assert lines["q"] == "{p ∨ q}" and lines["¬p"] == "∅"


def test_single_literal_body():
    _, _, plain, fast, cmap = trees("not p")
    assert check(plain, 0, False) is T
    assert optimised_check(fast, cmap, 0, False) is T


def test_step_by_step_collapse():
    # (p ∨ q) ∧ ¬(r ∨ s), observed p, q, ¬r, ¬s
    _, atoms, plain, fast, cmap = trees("(p or q) and not (r or s)")
    seq = [(0, True), (1, True), (2, False), (3, False)]
    assert [check(plain, a, v) for a, v in seq] == [U, U, U, T]
    assert [optimised_check(fast, cmap, a, v) for a, v in seq] == [U, U, U, T]


def test_early_falsification():
    _, _, plain, fast, cmap = trees("p and (q or r)")
    assert check(plain, 0, False) is F
    assert optimised_check(fast, cmap, 0, False) is F
    assert plain.vertex_count() == 1 and fast.vertex_count() == 1


def test_constants_collapse_at_build():
    psi = normalize(parse_psi("p or true"))
    assert build_tree(psi).verdict is T
    psi = normalize(parse_psi("p and false"))
    assert build_tree(psi).verdict is F


def test_unknown_atom():
    _, _, _, fast, cmap = trees("p or q")
    with pytest.raises(UnknownAtom):
        optimised_check(fast, cmap, 7, True)


def test_size_bound_values():
    assert closure_size_bound(0, 3) == 1
    assert closure_size_bound(1, 4) == 5
    assert closure_size_bound(2, 2) == 7
    assert closure_size_bound(3, 1) == 4


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_engines_agree_with_kleene(data):
    text = gen_psi(DataSource(data))
    psi, atoms, plain, fast, cmap = trees(text)
    order = data.draw(st.permutations(range(len(atoms))))
    values = {}
    for a in order:
        v = data.draw(st.booleans())
        values[a] = v
        expected = evaluate(psi, lambda x: Verdict.of(values[atoms.index(x)]) if atoms.index(x) in values else U)
        assert check(plain, a, v) is expected
        assert optimised_check(fast, cmap, a, v) is expected
    assert plain.verdict is not U


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_tree_size_bound_and_shrinking(data):
    psi, atoms, plain, fast, cmap = trees(gen_psi(DataSource(data)))
    bound = closure_size_bound(arity(psi), chain_length(psi))
    assert plain.vertex_count() <= bound
    sizes = [fast.vertex_count()]
    for a in data.draw(st.permutations(range(len(atoms)))):
        optimised_check(fast, cmap, a, data.draw(st.booleans()))
        sizes.append(fast.vertex_count())
    assert all(b <= a for a, b in zip(sizes, sizes[1:]))


# monitors and configurations

FORMULA = parse_formula(
    "forall q in changes(a) . forall t in future_calls(q, g) . (q(a) = 20 => duration(t) in [0, 10])"
)


def test_monitor_observe_and_configuration():
    m = Monitor(FORMULA)
    assert m.observe(0, True) is U
    assert m.observe(1, True) is T
    assert m.collapsed
    assert m.configuration().values == (T, T)
    assert m.trace == [U, T]
    # later observations of a decided atom are ignored
    assert m.observe(0, False) is T


def test_snapshot_needs_collapse():
    with pytest.raises(NotCollapsed):
        snapshot_configuration(Monitor(FORMULA))


def test_instantiate_from_replays_earlier_atoms():
    m = Monitor(FORMULA)
    m.observe(0, True)
    m.observe(1, True)
    cmap = ConfigurationMap()
    cmap.store(0, snapshot_configuration(m))
    cmap.store(0, snapshot_configuration(m))
    assert len(cmap) == 1
    (config,) = cmap.lookup(0)
    fresh = instantiate_from(config, 1, FORMULA)
    assert fresh.observed == [T, U] and fresh.verdict is U
    assert fresh.observe(1, False) is F
    # the antecedent false decides the body regardless of t
    m2 = Monitor(FORMULA)
    m2.observe(0, False)
    assert instantiate_from(m2.configuration(), [1], FORMULA).verdict is T


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_monitor_modes_agree(data):
    f = parse_formula(
        "forall q in changes(x) . (q(x) = 1 or q(x) in [2, 3]) and not (q(y) = 0 and q(z) = 1)"
    )
    a, b = Monitor(f, optimised=True), Monitor(f, optimised=False)
    for i in data.draw(st.permutations(range(len(f.atoms)))):
        v = data.draw(st.booleans())
        assert a.observe(i, v) is b.observe(i, v)
