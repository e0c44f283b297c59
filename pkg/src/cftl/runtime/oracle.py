"""Brute-force semantics of CFTL over a recorded run.

Works directly on the sequence of concrete states and transitions, without
the SCFG, the instrumentation plan or formula trees, so that it can serve as
an independent reference for the online engine.
"""

from __future__ import annotations

from typing import Iterable, Optional

from cftl.formula import CftlFormula, DomainKind, DurationIn, evaluate
from cftl.lang.interpreter import ConcreteState, ObservationEvent, TransitionRecord
from cftl.truth import Verdict

Record = object  # ConcreteState | TransitionRecord


def records_of(obs: Iterable) -> list:
    """Accept observation events or bare records; return records in time order."""
    out = [o.record if isinstance(o, ObservationEvent) else o for o in obs]
    return sorted(out, key=lambda r: r.key)


def _in_domain(q, rec, dep) -> bool:
    if q.kind in (DomainKind.CHANGES, DomainKind.FUTURE_CHANGES):
        ok = isinstance(rec, ConcreteState) and rec.assigned == q.symbol
    else:
        ok = isinstance(rec, TransitionRecord) and rec.callee == q.symbol
    if ok and dep is not None:
        ok = rec.key > dep.key
    return ok


def generated_bindings(obs: Iterable, f: CftlFormula) -> list:
    """All maximal (possibly partial) bindings derivable from ``obs``."""
    records = records_of(obs)
    out: list = []

    def extend(prefix: tuple) -> None:
        k = len(prefix)
        if k == len(f.quantifiers):
            out.append(prefix)
            return
        q = f.quantifiers[k]
        dep = prefix[f.var_index(q.dep)] if q.kind.dependent else None
        domain = [r for r in records if _in_domain(q, r, dep)]
        if not domain:
            if k > 0:
                out.append(prefix)
            return
        for r in domain:
            extend(prefix + (r,))

    extend(())
    return out


def resolve_step(step, anchor, records: list) -> Optional[Record]:
    """Apply one selector step at runtime; None when the target does not exist."""
    if step.op == "source":
        return next((r for r in records if isinstance(r, ConcreteState) and r.time == anchor.start), None)
    if step.op == "dest":
        return next((r for r in records if isinstance(r, ConcreteState) and r.time == anchor.end), None)
    if step.op == "incident":
        return next((r for r in records if isinstance(r, TransitionRecord) and r.end == anchor.time), None)
    if step.op == "next_call":
        return next(
            (r for r in records
             if isinstance(r, TransitionRecord) and r.callee == step.symbol and r.key > anchor.key),
            None,
        )
    if step.op == "next_change":
        return next(
            (r for r in records
             if isinstance(r, ConcreteState) and r.assigned == step.symbol and r.key > anchor.key),
            None,
        )
    raise ValueError(f"unknown selector step {step.op!r}")


def resolve_selector(atom, binding: tuple, f: CftlFormula, records: list) -> list:
    """Records visited by the atom's selector chain, or [] when it breaks off."""
    r = f.root_index(atom)
    if r >= len(binding):
        return []
    path = [binding[r]]
    for step in atom.sel.steps:
        nxt = resolve_step(step, path[-1], records)
        if nxt is None:
            return []
        path.append(nxt)
    return path


def atom_value(atom, binding: tuple, f: CftlFormula, records: list) -> Verdict:
    path = resolve_selector(atom, binding, f, records)
    if not path:
        return Verdict.UNKNOWN
    target = path[-1]
    if isinstance(atom, DurationIn):
        return Verdict.of(atom.holds(target.duration))
    return Verdict.of(atom.holds(target.value(atom.symbol)))


def binding_verdict(binding: tuple, f: CftlFormula, records: list) -> Verdict:
    return evaluate(f.body, lambda a: atom_value(a, binding, f, records))


def oracle_evaluate(trace: Iterable, f: CftlFormula, complete: bool = True) -> Verdict:
    """Three-valued verdict of ``f`` on a run.

    With ``complete=False`` the trace is treated as a prefix: a true verdict
    is never given because later observations could add bindings.
    """
    records = records_of(trace)
    verdicts = [binding_verdict(b, f, records) for b in generated_bindings(records, f)]
    if any(v is Verdict.FALSE for v in verdicts):
        return Verdict.FALSE
    if not complete:
        return Verdict.UNKNOWN
    if all(v is Verdict.TRUE for v in verdicts):
        return Verdict.TRUE
    return Verdict.UNKNOWN
