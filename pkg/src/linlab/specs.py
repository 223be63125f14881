"""Sequential specifications.

Each spec is a small transition system: an initial state plus an `apply_all`
relation from (state, op name, args) to allowed (state', response) pairs.
Deterministic types yield exactly one pair; relaxed containers and the set
yield several. Replay code treats every spec through `apply_all`, so checkers
do not care which kind they got.

Relaxed container notes:

* multiplicity: a dequeue/pop may repeat the item returned by the immediately
  preceding group of removals, but only for operations that are concurrent
  with every member of that group. The transition therefore carries the group
  opids and a concurrency predicate decides legality (from the ambient history
  during replay; "distinct processes" when enumerating abstract sequential
  executions).
* stuttering(m): one counter per operation type; below m the op may leave the
  state unchanged (a removal still reports the front/top element), an
  effective op resets the counter. Empty-container removals return the empty
  sentinel, keep the state and reset the counter (the bound only matters for
  state-changing choices, so the empty case is pinned to the simpler reading).
* out-of-order(k): a dequeue removes any of the k oldest items.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional

from .errors import ConfigurationError
from .model import BOT, EMPTY, EPS, OK, OpId

COMMUTE = "commute"
A_OVERWRITES_B = "leftOverwritesRight"
B_OVERWRITES_A = "rightOverwritesLeft"
BOTH_OVERWRITE = "bothOverwrite"

AnyConc = Callable[[OpId, OpId], bool]


@dataclass
class SequentialSpec:
    name: str
    initial_state: Any
    transitions: Callable[[Any, str, tuple, Optional[OpId], AnyConc], Iterable[tuple]]
    valid_state: Callable[[Any], bool]
    relation: Optional[Callable[[tuple, tuple], str]] = None
    op_space: Optional[Callable[[int], tuple]] = None
    deterministic: bool = True

    def apply_all(self, state, name, args, op=None, conc=None):
        if conc is None:
            conc = lambda a, b: True
        return self.transitions(state, name, args, op, conc)

    def apply(self, state, name, args, op=None):
        """Deterministic shortcut; raises if the spec branches here."""
        outs = list(self.apply_all(state, name, args, op))
        if len(outs) != 1:
            raise ConfigurationError(
                f"spec {self.name}: {name}{args} is not deterministic at state {state!r}")
        return outs[0]

    # States are plain immutables throughout; freeze/thaw exist so replay code
    # can hash states without knowing the spec.
    def freeze(self, state):
        return state

    def thaw(self, state):
        return state


def _bad_op(spec: str, name: str):
    raise ConfigurationError(f"spec {spec} does not understand operation {name!r}")


# ---------------------------------------------------------------------------
# deterministic simple types


def register_spec(initial: Any = 0) -> SequentialSpec:
    def tr(s, name, args, op, conc):
        if name == "write":
            yield args[0], OK
        elif name == "read":
            yield s, s
        else:
            _bad_op("register", name)

    def rel(a, b):
        an, bn = a[0], b[0]
        if an == "write" and bn == "write":
            return BOTH_OVERWRITE
        if an == "write":
            return A_OVERWRITES_B
        if bn == "write":
            return B_OVERWRITES_A
        return COMMUTE

    return SequentialSpec(
        "register", initial, tr, valid_state=lambda s: True, relation=rel,
        op_space=lambda values: tuple([("read", ())] + [("write", (v,)) for v in range(values + 1)]))


def max_register_spec() -> SequentialSpec:
    def tr(s, name, args, op, conc):
        if name == "write_max":
            k = args[0]
            if not isinstance(k, int) or k < 0:
                raise ConfigurationError(f"write_max needs a non-negative int, got {k!r}")
            yield max(s, k), OK
        elif name == "read_max":
            yield s, s
        else:
            _bad_op("max_register", name)

    def rel(a, b):
        an, bn = a[0], b[0]
        if an == "write_max" and bn == "write_max":
            va, vb = a[1][0], b[1][0]
            if va == vb:
                return BOTH_OVERWRITE
            return A_OVERWRITES_B if va > vb else B_OVERWRITES_A
        if an == "write_max" and bn == "read_max":
            return A_OVERWRITES_B
        if an == "read_max" and bn == "write_max":
            return B_OVERWRITES_A
        return COMMUTE

    return SequentialSpec(
        "max_register", 0, tr, valid_state=lambda s: isinstance(s, int) and s >= 0,
        relation=rel,
        op_space=lambda values: tuple([("read_max", ())] +
                                      [("write_max", (v,)) for v in range(values + 1)]))


def counter_spec() -> SequentialSpec:
    def tr(s, name, args, op, conc):
        if name == "inc":
            yield s + 1, OK
        elif name == "read":
            yield s, s
        else:
            _bad_op("counter", name)

    def rel(a, b):
        an, bn = a[0], b[0]
        if an == "inc" and bn == "inc":
            return COMMUTE
        if an == "inc" and bn == "read":
            return A_OVERWRITES_B
        if an == "read" and bn == "inc":
            return B_OVERWRITES_A
        return COMMUTE

    return SequentialSpec(
        "counter", 0, tr, valid_state=lambda s: isinstance(s, int) and s >= 0,
        relation=rel,
        op_space=lambda values: (("inc", ()), ("read", ())))


def snapshot_spec(n: int) -> SequentialSpec:
    """Single-writer atomic snapshot: update() writes the invoker's component."""

    def tr(s, name, args, op, conc):
        if name == "update":
            if op is None:
                raise ConfigurationError("snapshot update needs the invoking op identity")
            comps = list(s)
            comps[op.proc] = args[0]
            yield tuple(comps), OK
        elif name == "scan":
            yield s, s
        else:
            _bad_op("snapshot", name)

    return SequentialSpec(
        "snapshot", (0,) * n, tr,
        valid_state=lambda s: isinstance(s, tuple) and len(s) == n,
        op_space=lambda values: tuple([("scan", ())] +
                                      [("update", (v,)) for v in range(values + 1)]))


def test_and_set_spec() -> SequentialSpec:
    def tr(s, name, args, op, conc):
        if name == "test_and_set":
            yield 1, s
        elif name == "read":
            yield s, s
        else:
            _bad_op("test_and_set", name)

    return SequentialSpec(
        "test_and_set", 0, tr, valid_state=lambda s: s in (0, 1),
        op_space=lambda values: (("test_and_set", ()), ("read", ())))


def multishot_test_and_set_spec() -> SequentialSpec:
    def tr(s, name, args, op, conc):
        if name == "test_and_set":
            yield 1, s
        elif name == "read":
            yield s, s
        elif name == "reset":
            yield 0, OK
        else:
            _bad_op("multishot_test_and_set", name)

    return SequentialSpec(
        "multishot_test_and_set", 0, tr, valid_state=lambda s: s in (0, 1),
        op_space=lambda values: (("test_and_set", ()), ("read", ()), ("reset", ())))


def fetch_increment_spec() -> SequentialSpec:
    def tr(s, name, args, op, conc):
        if name == "fetch_and_increment":
            yield s + 1, s
        elif name == "read":
            yield s, s
        else:
            _bad_op("fetch_increment", name)

    return SequentialSpec(
        "fetch_increment", 0, tr, valid_state=lambda s: isinstance(s, int) and s >= 0,
        op_space=lambda values: (("fetch_and_increment", ()), ("read", ())))


def set_spec() -> SequentialSpec:
    """Unordered set: take removes and returns an arbitrary member (branching)."""

    def tr(s, name, args, op, conc):
        if name == "put":
            x = args[0]
            yield s | frozenset([x]), OK
        elif name == "take":
            if not s:
                yield s, EMPTY
            else:
                for x in sorted(s, key=repr):
                    yield s - frozenset([x]), x
        else:
            _bad_op("set", name)

    return SequentialSpec(
        "set", frozenset(), tr, valid_state=lambda s: isinstance(s, frozenset),
        deterministic=False,
        op_space=lambda values: tuple([("take", ())] +
                                      [("put", (v,)) for v in range(values + 1)]))


# ---------------------------------------------------------------------------
# containers


def queue_spec() -> SequentialSpec:
    def tr(s, name, args, op, conc):
        if name == "enq":
            yield s + (args[0],), OK
        elif name == "deq":
            if s:
                yield s[1:], s[0]
            else:
                yield s, EMPTY
        else:
            _bad_op("queue", name)

    return SequentialSpec(
        "queue", (), tr, valid_state=lambda s: isinstance(s, tuple),
        op_space=lambda values: tuple([("deq", ())] + [("enq", (v,)) for v in range(values + 1)]))


def stack_spec() -> SequentialSpec:
    def tr(s, name, args, op, conc):
        if name == "push":
            yield s + (args[0],), OK
        elif name == "pop":
            if s:
                yield s[:-1], s[-1]
            else:
                yield s, EPS
        else:
            _bad_op("stack", name)

    return SequentialSpec(
        "stack", (), tr, valid_state=lambda s: isinstance(s, tuple),
        op_space=lambda values: tuple([("pop", ())] + [("push", (v,)) for v in range(values + 1)]))


def multiplicity_queue_spec() -> SequentialSpec:
    # state = (items, dup group); group = (item, opids of the removals that
    # returned it) while removals stay consecutive, else None
    def tr(s, name, args, op, conc):
        items, group = s
        if name == "enq":
            yield (items + (args[0],), None), OK
        elif name == "deq":
            if items:
                yield (items[1:], (items[0], (op,))), items[0]
            else:
                yield (items, None), EMPTY
            if group is not None:
                x, ops = group
                if op is not None and all(o is not None and conc(op, o) for o in ops):
                    yield (items, (x, ops + (op,))), x
        else:
            _bad_op("multiplicity_queue", name)

    return SequentialSpec(
        "multiplicity_queue", ((), None), tr,
        valid_state=lambda s: isinstance(s, tuple) and len(s) == 2,
        deterministic=False,
        op_space=lambda values: tuple([("deq", ())] + [("enq", (v,)) for v in range(values + 1)]))


def multiplicity_stack_spec() -> SequentialSpec:
    def tr(s, name, args, op, conc):
        items, group = s
        if name == "push":
            yield (items + (args[0],), None), OK
        elif name == "pop":
            if items:
                yield (items[:-1], (items[-1], (op,))), items[-1]
            else:
                yield (items, None), EPS
            if group is not None:
                x, ops = group
                if op is not None and all(o is not None and conc(op, o) for o in ops):
                    yield (items, (x, ops + (op,))), x
        else:
            _bad_op("multiplicity_stack", name)

    return SequentialSpec(
        "multiplicity_stack", ((), None), tr,
        valid_state=lambda s: isinstance(s, tuple) and len(s) == 2,
        deterministic=False,
        op_space=lambda values: tuple([("pop", ())] + [("push", (v,)) for v in range(values + 1)]))


def stuttering_queue_spec(m: int) -> SequentialSpec:
    if m < 1:
        raise ConfigurationError("stuttering bound m must be >= 1")

    # state = (items, enq counter, deq counter)
    def tr(s, name, args, op, conc):
        items, ce, cd = s
        if name == "enq":
            yield (items + (args[0],), 0, cd), OK
            if ce < m:
                yield (items, ce + 1, cd), OK
        elif name == "deq":
            if not items:
                yield (items, ce, 0), EMPTY
            else:
                yield (items[1:], ce, 0), items[0]
                if cd < m:
                    yield (items, ce, cd + 1), items[0]
        else:
            _bad_op("stuttering_queue", name)

    return SequentialSpec(
        f"stuttering_queue(m={m})", ((), 0, 0), tr,
        valid_state=lambda s: 0 <= s[1] <= m and 0 <= s[2] <= m,
        deterministic=False,
        op_space=lambda values: tuple([("deq", ())] + [("enq", (v,)) for v in range(values + 1)]))


def stuttering_stack_spec(m: int) -> SequentialSpec:
    if m < 1:
        raise ConfigurationError("stuttering bound m must be >= 1")

    def tr(s, name, args, op, conc):
        items, cp, cq = s
        if name == "push":
            yield (items + (args[0],), 0, cq), OK
            if cp < m:
                yield (items, cp + 1, cq), OK
        elif name == "pop":
            if not items:
                yield (items, cp, 0), EPS
            else:
                yield (items[:-1], cp, 0), items[-1]
                if cq < m:
                    yield (items, cp, cq + 1), items[-1]
        else:
            _bad_op("stuttering_stack", name)

    return SequentialSpec(
        f"stuttering_stack(m={m})", ((), 0, 0), tr,
        valid_state=lambda s: 0 <= s[1] <= m and 0 <= s[2] <= m,
        deterministic=False,
        op_space=lambda values: tuple([("pop", ())] + [("push", (v,)) for v in range(values + 1)]))


def out_of_order_queue_spec(k: int) -> SequentialSpec:
    if k < 1:
        raise ConfigurationError("out-of-order bound k must be >= 1")

    def tr(s, name, args, op, conc):
        if name == "enq":
            yield s + (args[0],), OK
        elif name == "deq":
            if not s:
                yield s, EMPTY
            else:
                for j in range(min(k, len(s))):
                    yield s[:j] + s[j + 1:], s[j]
        else:
            _bad_op("out_of_order_queue", name)

    return SequentialSpec(
        f"out_of_order_queue(k={k})", (), tr, valid_state=lambda s: isinstance(s, tuple),
        deterministic=(k == 1),
        op_space=lambda values: tuple([("deq", ())] + [("enq", (v,)) for v in range(values + 1)]))


# ---------------------------------------------------------------------------
# registry


SPEC_FACTORIES: dict[str, Callable[..., SequentialSpec]] = {
    "register": register_spec,
    "max_register": max_register_spec,
    "counter": counter_spec,
    "snapshot": snapshot_spec,
    "test_and_set": test_and_set_spec,
    "multishot_test_and_set": multishot_test_and_set_spec,
    "fetch_increment": fetch_increment_spec,
    "set": set_spec,
    "queue": queue_spec,
    "stack": stack_spec,
    "multiplicity_queue": multiplicity_queue_spec,
    "multiplicity_stack": multiplicity_stack_spec,
    "stuttering_queue": stuttering_queue_spec,
    "stuttering_stack": stuttering_stack_spec,
    "out_of_order_queue": out_of_order_queue_spec,
}


def make_spec(kind: str, **params) -> SequentialSpec:
    try:
        factory = SPEC_FACTORIES[kind]
    except KeyError:
        raise ConfigurationError(f"unknown spec kind {kind!r}")
    return factory(**params)
