"""Simulated atomic base objects and the object table.

Every object holds an immutable state and answers single actions atomically.
All kinds are readable: a plain `read` returns the current state without
moving it, which is what checker ground truth and the agreement harness's
collect phase rely on. Integer-carrying objects use native ints, so there is
no word-size ceiling anywhere.

Keys into the object table are tuples like ('R',) or ('TS', 3). Growable
arrays ("infinite" in the source material) allocate an element the first time
an index is touched; the per-element template comes from the owning layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .errors import CapabilityError, ConfigurationError
from .model import EMPTY, EPS, OK, OpId
from . import specs as _specs

ObjKey = tuple

REGISTER = "Register"
FETCH_ADD = "FetchAdd"
TEST_AND_SET = "TestAndSet"
TWO_PROC_TEST_AND_SET = "TwoProcTestAndSet"
SWAP = "Swap"
SNAPSHOT = "AtomicSnapshot"
MAX_REGISTER = "AtomicMaxRegister"
QUEUE = "AtomicQueue"
STACK = "AtomicStack"
RELAXED_QUEUE = "AtomicRelaxedQueue"
RELAXED_STACK = "AtomicRelaxedStack"

KINDS = (REGISTER, FETCH_ADD, TEST_AND_SET, TWO_PROC_TEST_AND_SET, SWAP,
         SNAPSHOT, MAX_REGISTER, QUEUE, STACK, RELAXED_QUEUE, RELAXED_STACK)

_DEFAULT_INIT = {
    REGISTER: 0,
    FETCH_ADD: 0,
    TEST_AND_SET: 0,
    TWO_PROC_TEST_AND_SET: (0, frozenset()),
    SWAP: 0,
    MAX_REGISTER: 0,
    QUEUE: (),
    STACK: (),
}


class _Unset:
    __slots__ = ()

    def __repr__(self):
        return "UNSET"


UNSET = _Unset()


@dataclass(frozen=True)
class ObjectSpec:
    """Declaration of one object (or one growable-array element)."""

    kind: str
    init: Any = UNSET
    params: tuple = ()  # sorted (key, value) pairs; e.g. (('n', 3),) for snapshots

    def initial_state(self) -> Any:
        if self.init is not UNSET:
            return self.init
        if self.kind == SNAPSHOT:
            return (0,) * dict(self.params)["n"]
        if self.kind in (RELAXED_QUEUE, RELAXED_STACK):
            return _relaxed_spec(self.kind, dict(self.params)).initial_state
        try:
            return _DEFAULT_INIT[self.kind]
        except KeyError:
            raise ConfigurationError(f"unknown object kind {self.kind!r}")


def _relaxed_spec(kind: str, params: dict) -> _specs.SequentialSpec:
    mode = params.get("mode")
    if kind == RELAXED_QUEUE:
        if mode == "multiplicity":
            return _specs.multiplicity_queue_spec()
        if mode == "stuttering":
            return _specs.stuttering_queue_spec(params["m"])
        if mode == "outOfOrder":
            return _specs.out_of_order_queue_spec(params["k"])
    else:
        if mode == "multiplicity":
            return _specs.multiplicity_stack_spec()
        if mode == "stuttering":
            return _specs.stuttering_stack_spec(params["m"])
    raise ConfigurationError(f"unknown relaxed mode {mode!r} for {kind}")


# A transition option: (new state, response, choice tag). Deterministic actions
# produce exactly one option; the scheduler's choice stream picks among several.
Option = tuple


def apply_action(kind: str, state: Any, action: tuple, proc: int,
                 params: dict, op: Optional[OpId] = None,
                 conc: Optional[Callable[[OpId, OpId], bool]] = None) -> list[Option]:
    name = action[0]
    if name == "load":  # harness-internal: seed a private replica from a collect
        return [(action[1], OK, None)]
    if kind == TWO_PROC_TEST_AND_SET:
        bit, procs = state
        if proc not in procs and len(procs) >= 2:
            raise CapabilityError(
                f"two-process test&set touched by a third process {proc} (after {sorted(procs)})")
        procs = procs | frozenset([proc])
        if name == "test_and_set":
            return [((1, procs), bit, None)]
        if name == "read":
            return [((bit, procs), bit, None)]
        raise ConfigurationError(f"{kind} does not support {name!r}")

    if name == "read":
        return [(state, state, None)]

    if kind == REGISTER:
        if name == "write":
            return [(action[1], OK, None)]
    elif kind == FETCH_ADD:
        if name == "fetch_add":
            return [(state + action[1], state, None)]
    elif kind == TEST_AND_SET:
        if name == "test_and_set":
            return [(1, state, None)]
    elif kind == SWAP:
        if name == "swap":
            return [(action[1], state, None)]
    elif kind == SNAPSHOT:
        if name == "update":
            comps = list(state)
            comps[proc] = action[1]
            return [(tuple(comps), OK, None)]
        if name == "scan":
            return [(state, state, None)]
    elif kind == MAX_REGISTER:
        if name == "write_max":
            return [(max(state, action[1]), OK, None)]
        if name == "read_max":
            return [(state, state, None)]
    elif kind == QUEUE:
        if name == "enq":
            return [(state + (action[1],), OK, None)]
        if name == "deq":
            if state:
                return [(state[1:], state[0], None)]
            return [(state, EMPTY, None)]
    elif kind == STACK:
        if name == "push":
            return [(state + (action[1],), OK, None)]
        if name == "pop":
            if state:
                return [(state[:-1], state[-1], None)]
            return [(state, EPS, None)]
    elif kind in (RELAXED_QUEUE, RELAXED_STACK):
        spec = _relaxed_spec(kind, params)
        args = action[1:]
        if params.get("solo"):
            # private replica run by one process: nothing is ever concurrent
            op, conc = None, None
        outs = list(spec.apply_all(state, name, args, op, conc or (lambda a, b: False)))
        return [(s2, resp, idx if len(outs) > 1 else None)
                for idx, (s2, resp) in enumerate(outs)]
    raise ConfigurationError(f"object kind {kind} does not support action {name!r}")


@dataclass
class BaseObject:
    key: ObjKey
    spec: ObjectSpec
    state: Any

    @property
    def kind(self) -> str:
        return self.spec.kind


class ObjectTable:
    """All shared objects of one simulation, keyed by sortable tuples."""

    def __init__(self, static: dict[ObjKey, ObjectSpec], arrays: dict[str, ObjectSpec]):
        self._static = dict(static)
        self._arrays = dict(arrays)
        self.objects: dict[ObjKey, BaseObject] = {
            k: BaseObject(k, s, s.initial_state()) for k, s in sorted(static.items())
        }

    def spec_for(self, key: ObjKey) -> ObjectSpec:
        if key in self._static:
            return self._static[key]
        if len(key) >= 2 and key[0] in self._arrays:
            return self._arrays[key[0]]
        raise ConfigurationError(f"no object declared at key {key!r}")

    def get(self, key: ObjKey) -> BaseObject:
        obj = self.objects.get(key)
        if obj is None:
            spec = self.spec_for(key)
            obj = BaseObject(key, spec, spec.initial_state())
            self.objects[key] = obj
        return obj

    def states(self) -> dict[ObjKey, Any]:
        return {k: o.state for k, o in self.objects.items()}

    def frozen(self) -> tuple:
        return tuple(sorted((k, o.state) for k, o in self.objects.items()))

    def clone(self) -> "ObjectTable":
        t = ObjectTable.__new__(ObjectTable)
        t._static = self._static
        t._arrays = self._arrays
        t.objects = {k: BaseObject(k, o.spec, o.state) for k, o in self.objects.items()}
        return t

    def dump(self) -> list[dict]:
        out = []
        for k, o in sorted(self.objects.items()):
            state = o.state
            if isinstance(state, int):
                state = str(state)  # decimal string: fetch&add words exceed JSON floats
            else:
                state = _json_state(state)
            out.append({"id": list(k), "kind": o.kind, "state": state})
        return out


def _json_state(v: Any) -> Any:
    if isinstance(v, tuple):
        return [_json_state(x) for x in v]
    if isinstance(v, frozenset):
        return sorted(_json_state(x) for x in v)
    if isinstance(v, OpId):
        return v.json()
    return v


def snapshot_states(table: ObjectTable) -> dict[ObjKey, Any]:
    """Checker-side ground truth; never advances any object."""
    return table.states()
