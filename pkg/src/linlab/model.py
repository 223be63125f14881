"""Histories, operations and linearizations.

A history is a finite sequence of invocation/response events produced by a
deterministic simulation run. Checkers consume histories; this module owns the
event vocabulary, well-formedness validation, the real-time partial order and
the "is this sequence a linearization of that history" predicate, including
nondeterministic (relaxed) sequential specs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Optional, Sequence

from .errors import ConfigurationError, UnknownOperationError

INVOKE = "invoke"
RESPOND = "respond"

# Distinguished response sentinels. EPS is the empty-stack answer, kept distinct
# from every process index and from EMPTY so decision functions can tell the
# container kinds apart.
OK = "OK"
EMPTY = "EMPTY"
EPS = "EPS"
BOT = None


@dataclass(frozen=True, order=True)
class OpId:
    """Identity of one operation instance: (invoking process, per-process sequence)."""

    proc: int
    seq: int

    def json(self) -> list:
        return [self.proc, self.seq]


@dataclass(frozen=True)
class Event:
    kind: str  # INVOKE or RESPOND
    op: OpId
    name: str
    payload: Any = None

    def json(self) -> dict:
        return {
            "kind": self.kind,
            "proc": self.op.proc,
            "seq": self.op.seq,
            "name": self.name,
            "payload": _jsonable(self.payload),
        }


def _jsonable(v: Any) -> Any:
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def _unjson(v: Any) -> Any:
    # JSON has no tuples; payloads round-trip as lists -> tuples so frozen
    # comparisons keep working.
    if isinstance(v, list):
        return tuple(_unjson(x) for x in v)
    return v


@dataclass(frozen=True)
class Violation:
    """One well-formedness defect, pointing at the offending event index."""

    index: int
    code: str
    message: str


class History:
    """Immutable event sequence with per-op indexing helpers."""

    def __init__(self, events: Iterable[Event] = ()):
        self.events: tuple[Event, ...] = tuple(events)
        self._inv: dict[OpId, int] = {}
        self._rsp: dict[OpId, int] = {}
        for i, e in enumerate(self.events):
            if e.kind == INVOKE:
                self._inv.setdefault(e.op, i)
            elif e.kind == RESPOND:
                self._rsp.setdefault(e.op, i)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, History) and self.events == other.events

    def __hash__(self) -> int:
        return hash(self.events)

    def __repr__(self) -> str:
        return f"History({len(self.events)} events)"

    def prefix(self, n: int) -> "History":
        return History(self.events[:n])

    # -- op views ---------------------------------------------------------

    def invoked_ops(self) -> tuple[OpId, ...]:
        return tuple(self._inv)

    def complete_ops(self) -> tuple[OpId, ...]:
        return tuple(op for op in self._inv if op in self._rsp)

    def pending_ops(self) -> tuple[OpId, ...]:
        return tuple(op for op in self._inv if op not in self._rsp)

    def invocation(self, op: OpId) -> Event:
        try:
            return self.events[self._inv[op]]
        except KeyError:
            raise UnknownOperationError(f"operation {op} was never invoked")

    def response(self, op: OpId) -> Optional[Event]:
        i = self._rsp.get(op)
        return None if i is None else self.events[i]

    def inv_index(self, op: OpId) -> int:
        if op not in self._inv:
            raise UnknownOperationError(f"operation {op} was never invoked")
        return self._inv[op]

    def rsp_index(self, op: OpId) -> Optional[int]:
        return self._rsp.get(op)

    # -- orders -----------------------------------------------------------

    def precedes(self, a: OpId, b: OpId) -> bool:
        """Real-time order: a's response is before b's invocation."""
        ia = self.inv_index(a)  # raises on unknown ids
        ib = self.inv_index(b)
        del ia
        ra = self._rsp.get(a)
        return ra is not None and ra < ib

    def overlaps(self, a: OpId, b: OpId) -> bool:
        return a != b and not self.precedes(a, b) and not self.precedes(b, a)

    # -- serialization ----------------------------------------------------

    def json(self) -> list[dict]:
        return [e.json() for e in self.events]

    @staticmethod
    def from_json(data: Sequence[dict]) -> "History":
        events = []
        for i, d in enumerate(data):
            try:
                events.append(
                    Event(d["kind"], OpId(d["proc"], d["seq"]), d["name"], _unjson(d.get("payload")))
                )
            except (KeyError, TypeError) as exc:
                raise ConfigurationError(f"bad event object at index {i}: {exc}")
        return History(events)

    def dumps(self) -> str:
        return json.dumps(self.json(), indent=2)

    @staticmethod
    def loads(text: str) -> "History":
        return History.from_json(json.loads(text))


def validate_history(h: History) -> list[Violation]:
    """Well-formedness: per-process alternation of invoke/respond, matching names,
    dense per-process sequence numbers. Violations come back as data."""
    out: list[Violation] = []
    open_op: dict[int, Event] = {}
    seen: set[OpId] = set()
    next_seq: dict[int, int] = {}
    for i, e in enumerate(h.events):
        p = e.op.proc
        if e.kind == INVOKE:
            if p in open_op:
                out.append(Violation(i, "invoke-while-pending",
                                     f"process {p} invoked {e.op} with {open_op[p].op} still pending"))
            if e.op in seen:
                out.append(Violation(i, "duplicate-op", f"{e.op} invoked twice"))
            want = next_seq.get(p, 0)
            if e.op.seq != want:
                out.append(Violation(i, "sequence-gap",
                                     f"process {p} invoked seq {e.op.seq}, expected {want}"))
            next_seq[p] = e.op.seq + 1
            seen.add(e.op)
            open_op[p] = e
        elif e.kind == RESPOND:
            inv = open_op.get(p)
            if inv is None or inv.op != e.op:
                out.append(Violation(i, "response-without-invocation",
                                     f"response for {e.op} does not match an open invocation"))
            else:
                if inv.name != e.name:
                    out.append(Violation(i, "name-mismatch",
                                         f"{e.op} invoked as {inv.name!r} but responded as {e.name!r}"))
                del open_op[p]
        else:
            out.append(Violation(i, "unknown-kind", f"event kind {e.kind!r}"))
    return out


def real_time_precedes(h: History, a: OpId, b: OpId) -> bool:
    """Public wrapper for the real-time order; unknown OpIds raise."""
    h.inv_index(a)
    h.inv_index(b)
    return h.precedes(a, b)


# ---------------------------------------------------------------------------
# Linearizations


@dataclass(frozen=True)
class LinEntry:
    """One position of a linearization: the op, what it was invoked as, and the
    response it takes in the sequential order."""

    op: OpId
    name: str
    args: tuple
    response: Any

    def key(self) -> tuple:
        return (self.op.proc, self.op.seq, self.name, self.args, _freeze(self.response))

    def json(self) -> dict:
        return {"op": self.op.json(), "name": self.name,
                "args": _jsonable(self.args), "response": _jsonable(self.response)}


def _freeze(v: Any) -> Any:
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    if isinstance(v, dict):
        return tuple(sorted((k, _freeze(x)) for k, x in v.items()))
    return v


Linearization = tuple  # of LinEntry; plain tuples keep hashing cheap


def lin_key(lin: Sequence[LinEntry]) -> tuple:
    return tuple(e.key() for e in lin)


def args_of(h: History, op: OpId) -> tuple:
    payload = h.invocation(op).payload
    if payload is None:
        return ()
    if isinstance(payload, tuple):
        return payload
    return (payload,)


def is_linearization_of(h: History, lin: Sequence[LinEntry], spec,
                        strict_complete: bool = True) -> bool:
    """True iff `lin` is a linearization of `h` under `spec`.

    Requirements checked: every entry was invoked in h; complete ops keep their
    recorded responses and are all present (unless strict_complete is False,
    used for prefix reasoning); real-time order is preserved; the sequence
    replays through the spec, where relaxed specs need only one allowed state
    path. Pending ops may be included with any spec-allowed response.
    """
    ids = [e.op for e in lin]
    if len(set(ids)) != len(ids):
        return False
    invoked = set(h.invoked_ops())
    for e in lin:
        if e.op not in invoked:
            return False
        inv = h.invocation(e.op)
        if inv.name != e.name or args_of(h, e.op) != e.args:
            return False
        rsp = h.response(e.op)
        if rsp is not None and _freeze(rsp.payload) != _freeze(e.response):
            return False
    if strict_complete:
        missing = set(h.complete_ops()) - set(ids)
        if missing:
            return False
    pos = {op: i for i, op in enumerate(ids)}
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if h.precedes(b, a):
                return False
        # a complete op not in lin must not precede anything in lin
    for c in h.complete_ops():
        if c in pos:
            continue
        for b in ids:
            if h.precedes(c, b):
                return False
    return replay_ok(spec, lin, h)


def replay_ok(spec, lin: Sequence[LinEntry], h: Optional[History] = None) -> bool:
    """Replay `lin` through `spec` from its initial state. Deterministic specs
    must reproduce each response; nondeterministic ones need one allowed path."""
    conc = h.overlaps if h is not None else (lambda a, b: True)
    states = {spec.freeze(spec.initial_state)}
    for e in lin:
        nxt = set()
        for fs in states:
            for s2, resp in spec.apply_all(spec.thaw(fs), e.name, e.args, e.op, conc):
                if _freeze(resp) == _freeze(e.response):
                    nxt.add(spec.freeze(s2))
        if not nxt:
            return False
        states = nxt
    return True
