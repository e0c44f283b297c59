"""Collapsing formula trees and the monitors built on them.

A formula tree has one internal node per conjunction or disjunction and one
leaf per literal.  Observing a literal's truth value replaces its leaves by
constants; a subtree that becomes decided is replaced in its parent by the
constant it collapsed to.  Two observation procedures are provided: a full
recursive traversal and an upward walk driven by the closure map.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

from cftl.formula import (
    And,
    Bottom,
    CftlFormula,
    Not,
    Or,
    Psi,
    Top,
    collect_atoms,
    direct_subformulas,
    is_atom,
    render,
)
from cftl.truth import Verdict


class UnknownAtom(KeyError):
    pass


class NotCollapsed(ValueError):
    pass


_ids = itertools.count()


@dataclass(eq=False)
class Leaf:
    atom: int
    positive: bool
    parent: Optional["Node"] = None
    order: int = field(default_factory=lambda: next(_ids))

    def label(self, names: Callable[[int], str]) -> str:
        return names(self.atom) if self.positive else f"¬{names(self.atom)}"


@dataclass(eq=False)
class Node:
    op: str  # "and" | "or"
    children: list  # Node | Leaf | Verdict
    parent: Optional["Node"] = None
    value: Optional[Verdict] = None  # set once this subtree has collapsed
    true_clauses: int = 0  # children replaced by TRUE
    false_clauses: int = 0  # children replaced by FALSE
    order: int = field(default_factory=lambda: next(_ids))

    def label(self, names: Callable[[int], str]) -> str:
        joiner = " ∧ " if self.op == "and" else " ∨ "
        parts = []
        for c in self.children:
            if isinstance(c, Verdict):
                parts.append(c.symbol)
            elif isinstance(c, Leaf):
                parts.append(c.label(names))
            else:
                parts.append(f"({c.label(names)})")
        return joiner.join(parts)

    def possible_value(self) -> Verdict:
        """Collapse value implied by the children replaced so far."""
        n = len(self.children)
        if self.op == "and":
            if self.false_clauses:
                return Verdict.FALSE
            if self.true_clauses == n:
                return Verdict.TRUE
        else:
            if self.true_clauses:
                return Verdict.TRUE
            if self.false_clauses == n:
                return Verdict.FALSE
        return Verdict.UNKNOWN

    def replace(self, index: int, value: Verdict) -> None:
        if isinstance(self.children[index], Verdict):
            return
        self.children[index] = value
        if value is Verdict.TRUE:
            self.true_clauses += 1
        elif value is Verdict.FALSE:
            self.false_clauses += 1


TreeItem = Union[Node, Leaf, Verdict]


class FormulaTree:
    """Tree of a normalized body; atoms are referred to by index."""

    def __init__(self, body: Psi, atom_index: Callable[[Psi], int]):
        self.atom_index = atom_index
        self.root: TreeItem = self._build(body, None)
        self.leaves: list = [x for x in self.walk() if isinstance(x, Leaf)]

    def _build(self, psi: Psi, parent: Optional[Node]) -> TreeItem:
        if isinstance(psi, Top):
            return Verdict.TRUE
        if isinstance(psi, Bottom):
            return Verdict.FALSE
        if is_atom(psi):
            return Leaf(self.atom_index(psi), True, parent)
        if isinstance(psi, Not):
            if not is_atom(psi.arg):
                raise ValueError("formula tree needs a body in negation normal form")
            return Leaf(self.atom_index(psi.arg), False, parent)
        node = Node("and" if isinstance(psi, And) else "or", [], parent)
        for sub in direct_subformulas(psi):
            child = self._build(sub, node)
            node.children.append(child)
            # constant operands count immediately
            if child is Verdict.TRUE:
                node.true_clauses += 1
            elif child is Verdict.FALSE:
                node.false_clauses += 1
        if node.possible_value() is not Verdict.UNKNOWN:
            node.value = node.possible_value()
            return node.value
        return node

    def walk(self) -> Iterable[TreeItem]:
        stack = [self.root]
        while stack:
            item = stack.pop()
            yield item
            if isinstance(item, Node):
                stack.extend(reversed(item.children))

    def vertex_count(self) -> int:
        """Vertices still in the tree, counting constants left by collapses."""
        return sum(1 for _ in self.walk())

    @property
    def verdict(self) -> Verdict:
        if isinstance(self.root, Verdict):
            return self.root
        return Verdict.UNKNOWN

    def collapse_root(self, value: Verdict) -> None:
        if value is not Verdict.UNKNOWN:
            if isinstance(self.root, Node):
                self.root.value = value
            self.root = value


def build_tree(body: Psi, atoms: Optional[tuple] = None) -> FormulaTree:
    """Build the formula tree of a normalized body.

    ``atoms`` fixes the atom numbering (defaults to first-occurrence order).
    """
    atoms = tuple(atoms) if atoms is not None else collect_atoms(body)
    index = {a: i for i, a in enumerate(atoms)}
    return FormulaTree(body, lambda a: index[a])


def _literal_value(leaf: Leaf, atom: int, value: bool) -> Optional[Verdict]:
    if leaf.atom != atom:
        return None
    return Verdict.of(leaf.positive == value)


# recursive traversal


def check(tree: FormulaTree, atom: int, value: bool) -> Verdict:
    """Observe ``atom`` with truth ``value`` by traversing the whole tree."""
    root = tree.root
    if isinstance(root, Verdict):
        return root
    if isinstance(root, Leaf):
        v = _literal_value(root, atom, value)
        if v is not None:
            tree.collapse_root(v)
        return tree.verdict
    result = _check_node(root, atom, value)
    tree.collapse_root(result)
    return tree.verdict


def _check_node(node: Node, atom: int, value: bool) -> Verdict:
    if node.value is not None:
        return node.value
    for i, child in enumerate(node.children):
        if isinstance(child, Verdict):
            continue
        if isinstance(child, Leaf):
            v = _literal_value(child, atom, value)
            if v is None:
                continue
        else:
            v = _check_node(child, atom, value)
            if v is Verdict.UNKNOWN:
                continue
        node.replace(i, v)
        if node.op == "or" and v is Verdict.TRUE:
            node.value = Verdict.TRUE
            return Verdict.TRUE
        if node.op == "and" and v is Verdict.FALSE:
            node.value = Verdict.FALSE
            return Verdict.FALSE
        if node.op == "and" and node.true_clauses == len(node.children):
            node.value = Verdict.TRUE
            return Verdict.TRUE
    # a disjunction whose operands all became false has collapsed too
    if node.op == "or" and node.false_clauses == len(node.children):
        node.value = Verdict.FALSE
        return Verdict.FALSE
    return Verdict.UNKNOWN


# closure map


@dataclass
class ClosureMap:
    """Signed atom -> immediate parents holding that literal."""

    entries: dict  # (atom index, positive) -> list[Node | Leaf]

    def lookup(self, atom: int, positive: bool) -> list:
        return self.entries.get((atom, positive), [])

    def occurrences(self, atom: int) -> list:
        seen = []
        for item in self.lookup(atom, True) + self.lookup(atom, False):
            if not any(item is s for s in seen):
                seen.append(item)
        return sorted(seen, key=lambda x: x.order)

    def render(self, names: Callable[[int], str], atoms: Iterable[int]) -> dict:
        out = {}
        for a in atoms:
            for positive in (True, False):
                key = names(a) if positive else f"¬{names(a)}"
                out[key] = [n.label(names) for n in self.lookup(a, positive)]
        return out


def closure_map(tree: FormulaTree) -> ClosureMap:
    entries: dict = {}

    def add(key, item):
        bucket = entries.setdefault(key, [])
        if not any(item is b for b in bucket):
            bucket.append(item)

    def visit(item: TreeItem):
        if isinstance(item, Leaf):
            add((item.atom, item.positive), item.parent if item.parent is not None else item)
        elif isinstance(item, Node):
            for c in item.children:
                visit(c)

    visit(tree.root)
    return ClosureMap(entries)


def _detached(item) -> bool:
    while item is not None:
        if isinstance(item, Node) and item.value is not None:
            return True
        item = item.parent
    return False


def optimised_check(tree: FormulaTree, cmap: ClosureMap, atom: int, value: bool) -> Verdict:
    """Observe ``atom`` using the closure map and an upward collapse."""
    if not any(leaf.atom == atom for leaf in tree.leaves):
        raise UnknownAtom(atom)
    if isinstance(tree.root, Verdict):
        return tree.root
    for holder in cmap.occurrences(atom):
        if isinstance(holder, Leaf):
            # the whole body is this literal
            tree.collapse_root(_literal_value(holder, atom, value))
            return tree.verdict
        if _detached(holder):
            continue
        for i, child in enumerate(holder.children):
            if isinstance(child, Leaf):
                v = _literal_value(child, atom, value)
                if v is not None:
                    holder.replace(i, v)
        node = holder
        current = node.possible_value()
        while current is not Verdict.UNKNOWN:
            node.value = current
            parent = node.parent
            if parent is None:
                tree.collapse_root(current)
                return current
            parent.replace(parent.children.index(node), current)
            node = parent
            current = node.possible_value()
    return tree.verdict


def closure_size_bound(p: int, n: int) -> float:
    """Largest vertex count of a tree with arity ``p`` and chain length ``n``."""
    if p == 0:
        return 1
    if p == 1:
        return n + 1
    return (1 - p ** (n + 1)) / (1 - p)


# monitors and configurations


@dataclass(frozen=True)
class Configuration:
    values: tuple  # Verdict per atom index

    def render(self, names: Callable[[int], str]) -> str:
        parts = [f"{names(i)} ↦ {v.symbol}" for i, v in enumerate(self.values)]
        return "[" + ", ".join(parts) + "]"


class Monitor:
    """One formula tree for one runtime binding."""

    def __init__(self, formula: CftlFormula, binding=None, optimised: bool = True):
        self.formula = formula
        self.binding = binding
        self.optimised = optimised
        self.tree = build_tree(formula.body, formula.atoms)
        self.cmap = closure_map(self.tree)
        self.observed: list = [Verdict.UNKNOWN] * len(formula.atoms)
        self.trace: list = []  # verdict after each observation

    @property
    def verdict(self) -> Verdict:
        return self.tree.verdict

    @property
    def collapsed(self) -> bool:
        return self.verdict is not Verdict.UNKNOWN

    def observe(self, atom: int, value: bool) -> Verdict:
        if not 0 <= atom < len(self.observed):
            raise UnknownAtom(atom)
        if self.observed[atom] is not Verdict.UNKNOWN:
            return self.verdict
        self.observed[atom] = Verdict.of(value)
        if not any(leaf.atom == atom for leaf in self.tree.leaves):
            return self.verdict
        if self.optimised:
            result = optimised_check(self.tree, self.cmap, atom, value)
        else:
            result = check(self.tree, atom, value)
        self.trace.append(result)
        return result

    def configuration(self) -> Configuration:
        return Configuration(tuple(self.observed))


def snapshot_configuration(m: Monitor) -> Configuration:
    if not m.collapsed:
        raise NotCollapsed("only collapsed monitors have a configuration to store")
    return m.configuration()


class ConfigurationMap:
    """Static binding -> configurations of monitors that collapsed on it."""

    def __init__(self):
        self._store: dict = {}

    def store(self, binding, config: Configuration) -> None:
        bucket = self._store.setdefault(binding, [])
        if config not in bucket:
            bucket.append(config)

    def lookup(self, binding) -> list:
        return list(self._store.get(binding, []))

    def __len__(self) -> int:
        return sum(len(v) for v in self._store.values())


def store(cmap: ConfigurationMap, binding, config: Configuration) -> None:
    cmap.store(binding, config)


def instantiate_from(
    config: Configuration,
    exclude: Union[int, Iterable[int], None],
    formula: CftlFormula,
    binding=None,
    optimised: bool = True,
) -> Monitor:
    """Fresh monitor replaying every decided atom of ``config`` except ``exclude``."""
    if exclude is None:
        skip = set()
    elif isinstance(exclude, int):
        skip = {exclude}
    else:
        skip = set(exclude)
    m = Monitor(formula, binding, optimised)
    for i, v in enumerate(config.values):
        if i in skip or v is Verdict.UNKNOWN:
            continue
        m.observe(i, v is Verdict.TRUE)
    return m


def describe(psi: Psi) -> str:
    return render(psi)
