"""JSON-lines serialization of observation events."""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Iterable, Optional

from cftl.lang.interpreter import (
    NOT_CALLED,
    UNDEFINED,
    CallResult,
    ConcreteState,
    ObservationEvent,
    TransitionRecord,
)


class TraceFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def encode_value(v: Any) -> Any:
    if v is UNDEFINED:
        return {"undefined": True}
    if v is NOT_CALLED:
        return {"not_called": True}
    if isinstance(v, CallResult):
        return {"call": v.callee, "args": [encode_value(a) for a in v.args]}
    if isinstance(v, Fraction):
        return {"q": str(v)}
    if isinstance(v, (list, tuple)):
        return [encode_value(x) for x in v]
    if v is None or isinstance(v, (bool, int, str)):
        return v
    raise TypeError(f"cannot encode {v!r}")


def decode_value(v: Any) -> Any:
    if isinstance(v, dict):
        if v.get("undefined"):
            return UNDEFINED
        if v.get("not_called"):
            return NOT_CALLED
        if "call" in v:
            return CallResult(v["call"], tuple(decode_value(a) for a in v["args"]))
        if "q" in v:
            return Fraction(v["q"])
        raise ValueError(f"unknown value object {v!r}")
    if isinstance(v, list):
        return tuple(decode_value(x) for x in v)
    return v


def event_to_json(ev: ObservationEvent, point: Optional[int] = None, binding: Optional[int] = None) -> dict:
    rec = ev.record
    out = {"seq": ev.seq, "t": str(ev.stamp), "point": point, "binding": binding}
    if isinstance(rec, ConcreteState):
        out.update(
            kind="state",
            vertex=rec.vertex,
            time=str(rec.time),
            assigned=rec.assigned,
            called=rec.called,
            values={s: encode_value(v) for s, v in rec.values},
        )
    else:
        out.update(
            kind="transition",
            edge=rec.edge,
            start=str(rec.start),
            duration=str(rec.duration),
            callee=rec.callee,
            assigned=rec.assigned,
        )
    return out


def event_from_json(data: dict) -> ObservationEvent:
    kind = data["kind"]
    if kind == "state":
        values = tuple(sorted((s, decode_value(v)) for s, v in data["values"].items()))
        rec = ConcreteState(
            values, int(data["vertex"]), Fraction(data["time"]), data.get("assigned"), data.get("called")
        )
    elif kind == "transition":
        rec = TransitionRecord(
            Fraction(data["start"]),
            Fraction(data["duration"]),
            int(data["edge"]),
            data.get("callee"),
            data.get("assigned"),
        )
    else:
        raise ValueError(f"unknown event kind {kind!r}")
    return ObservationEvent(int(data["seq"]), Fraction(data["t"]), rec)


def dumps_trace(events: Iterable[ObservationEvent], annotate=None) -> str:
    """One JSON object per line; ``annotate(ev)`` may supply (point, binding)."""
    lines = []
    for ev in events:
        point, binding = annotate(ev) if annotate else (None, None)
        lines.append(json.dumps(event_to_json(ev, point, binding), sort_keys=True))
    return "".join(line + "\n" for line in lines)


def loads_trace(text: str) -> list:
    events = []
    last_seq, last_t = None, None
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            ev = event_from_json(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise TraceFormatError(n, str(exc) or exc.__class__.__name__) from None
        if last_seq is not None and (ev.seq <= last_seq or ev.stamp <= last_t):
            raise TraceFormatError(n, "events out of order")
        last_seq, last_t = ev.seq, ev.stamp
        events.append(ev)
    return events
