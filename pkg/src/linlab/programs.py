"""Implementations under test.

Each program bundles operation code (generators fed to the scheduler), the
shared-object layout it runs over, the sequential spec of the type it claims
to implement, published step budgets, and optional step-point rules. The
catalog holds the algorithms whose claimed properties the checkers verify;
`collectCounter` is a deliberately weak extra used as a negative example.

Programs can nest: an entry can realise one of its base objects by inlining
the step sequence of another program (`yield from`), which is how the set
obtains its readable fetch-and-increment and how the snapshot-based type can
run over the fetch-and-add snapshot instead of an atomic one.
"""

from __future__ import annotations

from typing import Callable, Optional

from .codec import binary_adjust, decode_binary_view, decode_unary_max, unary_delta
from .errors import ConfigurationError, IntegrityError, UnknownOperationError
from .model import BOT, EMPTY, OK, OpId, RESPOND
from .objects import (FETCH_ADD, MAX_REGISTER, REGISTER, SNAPSHOT, TEST_AND_SET,
                      ObjectSpec)
from .scheduler import Trace, Workload
from . import specs as specs_mod

WAIT_FREE = "waitFree"
LOCK_FREE = "lockFree"


class Program:
    """One shared-memory implementation with its metadata."""

    # optional hook: fold a simulation config into a smaller graph key
    # (must preserve the (table, per-proc entries) tuple shape)
    config_key = None

    def __init__(self, name: str, n: int, spec, layout, ops: dict,
                 progress: str, description: str, base_objects: str,
                 catalog: bool = True, params: Optional[dict] = None,
                 budgets: Optional[Callable] = None,
                 point_rule: Optional[Callable] = None,
                 validate: Optional[Callable] = None,
                 invariant: Optional[Callable] = None,
                 strongly_linearizable: bool = True):
        self.name = name
        self.n = n
        self.spec = spec
        self.layout = layout
        self.ops = ops                      # op name -> generator function
        self.progress = progress
        self.description = description
        self.base_objects = base_objects
        self.catalog = catalog
        self.params = params or {}
        self._budgets = budgets
        self.point_rule = point_rule
        self._validate = validate
        self.invariant = invariant          # trace -> list of violation strings
        self.strongly_linearizable = strongly_linearizable

    # start() is what the Simulation calls for every invocation
    def start(self, proc: int, op_id: OpId, name: str, args: tuple, ctx):
        try:
            fn = self.ops[name]
        except KeyError:
            raise UnknownOperationError(f"{self.name} has no operation {name!r}")
        return fn(self, proc, op_id, args, ctx)

    def step_budget(self, name: str, workload: Workload) -> Optional[int]:
        if self._budgets is None:
            return None
        return self._budgets(self, name, workload)

    def validate_workload(self, workload: Workload):
        if workload.n != self.n:
            raise ConfigurationError(
                f"workload is for {workload.n} processes, program for {self.n}")
        values = self.params.get("values", 3)
        for seq in workload.per_proc:
            for name, args in seq:
                if name not in self.ops:
                    raise UnknownOperationError(
                        f"{self.name} has no operation {name!r}")
                for a in args:
                    if isinstance(a, int) and not 0 <= a <= values:
                        raise ConfigurationError(
                            f"argument {a} outside the value domain 0..{values}")
        if self._validate is not None:
            self._validate(self, workload)

    def claims(self) -> dict:
        return {"linearizable": True,
                "stronglyLinearizable": self.strongly_linearizable,
                "progress": self.progress}

    def describe(self) -> dict:
        return {"name": self.name, "n": self.n, "implements": self.spec.name,
                "baseObjects": self.base_objects, "progress": self.progress,
                "operations": sorted(self.ops), "description": self.description,
                "claims": self.claims(), "params": dict(self.params)}


def _total_ops(workload: Workload) -> int:
    return sum(len(seq) for seq in workload.per_proc)


def _count_ops(workload: Workload, names) -> int:
    return sum(1 for seq in workload.per_proc for nm, _ in seq if nm in names)


# ---------------------------------------------------------------------------
# max register from one fetch-and-add word (unary layout)


def _maxreg_write(prog, proc, op_id, args, ctx):
    k = args[0]
    prev = ctx.get("prevLocalMax", 0)
    if k <= prev:
        yield (("R",), ("fetch_add", 0))
        return OK
    delta = unary_delta(prog.n, proc, prev, k)
    yield (("R",), ("fetch_add", delta))
    ctx.set("prevLocalMax", k)
    return OK


def _maxreg_read(prog, proc, op_id, args, ctx):
    raw = yield (("R",), ("fetch_add", 0))
    vec = decode_unary_max(raw, prog.n)
    return max(vec) if vec else 0


def _one_step_budget(prog, name, workload):
    return 1


def _single_fa_rule(trace: Trace):
    """Every operation is linearized at its unique fetch-and-add step."""
    points = []
    for s in trace.steps:
        if s.action[0] == "fetch_add":
            points.append((s.op, s.index, 0))
    return points


def max_register_fa(n: int, values: int = 3) -> Program:
    return Program(
        "maxRegisterFA", n, specs_mod.max_register_spec(),
        ({("R",): ObjectSpec(FETCH_ADD, init=0)}, {}),
        {"write_max": _maxreg_write, "read_max": _maxreg_read},
        WAIT_FREE,
        "bounded max register over a single fetch-and-add word; writers bump "
        "their unary column, readers decode the whole word in one step",
        "one fetch-and-add word",
        params={"values": values},
        budgets=_one_step_budget,
        point_rule=_single_fa_rule)


# ---------------------------------------------------------------------------
# single-writer snapshot from one fetch-and-add word (binary layout)


def _snap_update(prog, proc, op_id, args, ctx):
    v = args[0]
    prev = ctx.get("prevVal", 0)
    if v == prev:
        yield (("R",), ("fetch_add", 0))
        return OK
    pos, neg = binary_adjust(prog.n, proc, prev, v)
    yield (("R",), ("fetch_add", pos - neg))
    ctx.set("prevVal", v)
    return OK


def _snap_scan(prog, proc, op_id, args, ctx):
    raw = yield (("R",), ("fetch_add", 0))
    return tuple(decode_binary_view(raw, prog.n))


def snapshot_fa(n: int, values: int = 3) -> Program:
    return Program(
        "snapshotFA", n, specs_mod.snapshot_spec(n),
        ({("R",): ObjectSpec(FETCH_ADD, init=0)}, {}),
        {"update": _snap_update, "scan": _snap_scan},
        WAIT_FREE,
        "single-writer atomic snapshot over a single fetch-and-add word; each "
        "component lives in an interleaved binary lane, updates adjust the "
        "lane with one signed add, scans decode the word in one step",
        "one fetch-and-add word",
        params={"values": values},
        budgets=_one_step_budget,
        point_rule=_single_fa_rule)


# ---------------------------------------------------------------------------
# generic readable types from one single-writer snapshot (published-node graph)


def _addr_encode(n: int, addr) -> int:
    # dense int coding for nested snapshot lanes; 0 stays the null address
    p, s = addr
    return 1 + p + n * s


def _addr_decode(n: int, v: int):
    if v == 0:
        return None
    return ((v - 1) % n, (v - 1) // n)


def _make_simple_op(op_name: str):
    def run(prog, proc, op_id, args, ctx):
        nested = prog.params.get("nested", False)
        n = prog.n
        if nested:
            raw = yield from _snap_scan(prog, proc, op_id, (), ctx)
            view = tuple(_addr_decode(n, v) for v in raw)
        else:
            view = yield (("root",), ("scan",))
            view = tuple(v if v != 0 else None for v in view)
        # breadth-first discovery of the published operation graph
        nodes = {}
        queue = [a for a in view if a is not None]
        seen = set(queue)
        while queue:
            addr = queue.pop(0)
            raw = yield (("node",) + addr, ("read",))
            if raw is BOT:
                raise IntegrityError(f"published address {addr} reads empty")
            nodes[addr] = raw
            for child in raw[4]:
                if child is not None and child not in seen:
                    seen.add(child)
                    queue.append(child)
        order = _linearize_nodes(prog.spec, nodes)
        state = prog.spec.initial_state
        for addr in order:
            nm, ag, p, _, _ = nodes[addr]
            state, _ = prog.spec.apply(state, nm, tuple(ag), op=OpId(p, addr[1]))
        state, resp = prog.spec.apply(state, op_name, args, op=op_id)
        addr = (op_id.proc, op_id.seq)
        entry = (op_name, args, op_id.proc, resp, view)
        yield (("node",) + addr, ("write", entry))
        if nested:
            yield from _snap_update(prog, proc, op_id, (_addr_encode(n, addr),), ctx)
        else:
            yield (("root",), ("update", addr))
        return resp
    return run


def _node_depth(nodes: dict) -> dict:
    depth = {}

    def rec(addr):
        if addr in depth:
            return depth[addr]
        preds = [a for a in nodes[addr][4] if a is not None and a in nodes]
        depth[addr] = 0 if not preds else 1 + max(rec(a) for a in preds)
        return depth[addr]

    for a in nodes:
        rec(a)
    return depth


def _linearize_nodes(spec, nodes: dict) -> list:
    """Order the discovered operations: pointer edges first, then dominance."""
    depth = _node_depth(nodes)
    base = sorted(nodes, key=lambda a: (depth[a], a[0], a[1]))
    succ = {a: set() for a in base}
    for a in base:
        for pred in nodes[a][4]:
            if pred is not None and pred in succ:
                succ[pred].add(a)

    def reaches(src, dst) -> bool:
        stack, seen = [src], set()
        while stack:
            x = stack.pop()
            if x == dst:
                return True
            for y in succ[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return False

    def dominated(a, b) -> bool:
        # does b overwrite a while a does not overwrite b (ties on process id)
        ea = (nodes[a][0], tuple(nodes[a][1]))
        eb = (nodes[b][0], tuple(nodes[b][1]))
        rel = spec.relation(ea, eb)
        if rel == specs_mod.B_OVERWRITES_A:
            return True
        if rel == specs_mod.BOTH_OVERWRITE:
            return nodes[a][2] < nodes[b][2]
        return False

    for i in range(len(base)):
        for j in range(i + 1, len(base)):
            a, b = base[i], base[j]
            if dominated(a, b) and not reaches(b, a):
                succ[a].add(b)
            elif dominated(b, a) and not reaches(a, b):
                succ[b].add(a)

    indeg = {a: 0 for a in base}
    for a in base:
        for b in succ[a]:
            indeg[b] += 1
    ready = sorted((a for a in base if indeg[a] == 0),
                   key=lambda a: (depth[a], a[0], a[1]))
    out = []
    while ready:
        a = ready.pop(0)
        out.append(a)
        for b in sorted(succ[a], key=lambda x: (depth[x], x[0], x[1])):
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
        ready.sort(key=lambda x: (depth[x], x[0], x[1]))
    if len(out) != len(base):
        raise IntegrityError("operation graph has a cycle")
    return out


def _simple_budget(prog, name, workload):
    return _total_ops(workload) + 3


def simple_type_from_snapshot(n: int, spec: str = "counter", nested: bool = False,
                              values: int = 3) -> Program:
    if spec == "counter":
        sp = specs_mod.counter_spec()
    elif spec in ("maxRegister", "max_register"):
        sp = specs_mod.max_register_spec()
    else:
        raise ConfigurationError(
            f"simpleTypeFromSnapshot supports counter or maxRegister, not {spec!r}")
    if sp.relation is None:
        raise ConfigurationError(f"spec {sp.name} has no overwrite relation")
    ops = {nm: _make_simple_op(nm) for nm, _ in sp.op_space(values)}
    if nested:
        layout = ({("R",): ObjectSpec(FETCH_ADD, init=0)},
                  {"node": ObjectSpec(REGISTER, init=BOT)})
        base = "fetch-and-add snapshot (nested) plus per-operation registers"
    else:
        layout = ({("root",): ObjectSpec(SNAPSHOT, params=(("n", n),))},
                  {"node": ObjectSpec(REGISTER, init=BOT)})
        base = "one single-writer snapshot plus per-operation registers"
    return Program(
        "simpleTypeFromSnapshot", n, sp, layout, ops,
        WAIT_FREE,
        "readable type whose operations publish themselves in a pointer graph "
        "rooted at a snapshot, then order the discovered graph with overwrite "
        "dominance and replay it",
        base,
        params={"spec": spec, "nested": nested, "values": values},
        budgets=_simple_budget)


# ---------------------------------------------------------------------------
# readable one-shot test-and-set


def _rtas_tas(prog, proc, op_id, args, ctx):
    w = yield (("ts",), ("test_and_set",))
    yield (("state",), ("write", 1))
    return w


def _rtas_read(prog, proc, op_id, args, ctx):
    v = yield (("state",), ("read",))
    return v


def _rtas_budget(prog, name, workload):
    return 2 if name == "test_and_set" else 1


def _rtas_invariant(trace: Trace) -> list:
    winners = [e.op for e in trace.history.events
               if e.kind == RESPOND and e.name == "test_and_set" and e.payload == 0]
    if len(winners) > 1:
        return [f"{len(winners)} acquisitions returned 0 ({winners}), "
                "expected at most one"]
    return []


def _rtas_rule(trace: Trace):
    """Winner at the first write to state, losers at their own write."""
    first_write = None
    for s in trace.steps:
        if s.key == ("state",) and s.action[0] == "write":
            first_write = s.index
            break
    points = []
    for s in trace.steps:
        if s.key == ("ts",):
            if s.response == 0:
                if first_write is None:
                    continue  # winner never surfaced, leave it out
                points.append((s.op, first_write, 0))
        elif s.key == ("state",) and s.action[0] == "write":
            if s.response == OK and not any(p[0] == s.op for p in points):
                points.append((s.op, s.index, 1))
        elif s.key == ("state",) and s.action[0] == "read":
            points.append((s.op, s.index, 1))
    return points


def readable_tas(n: int) -> Program:
    return Program(
        "readableTAS", n, specs_mod.test_and_set_spec(),
        ({("ts",): ObjectSpec(TEST_AND_SET, init=0),
          ("state",): ObjectSpec(REGISTER, init=0)},
         {}),
        {"test_and_set": _rtas_tas, "read": _rtas_read},
        WAIT_FREE,
        "readable test-and-set: the winner is decided by a plain test-and-set "
        "object, a second register makes the outcome readable",
        "one test-and-set object and one register",
        budgets=_rtas_budget,
        point_rule=_rtas_rule,
        invariant=_rtas_invariant)


# ---------------------------------------------------------------------------
# multi-shot test-and-set from readable test-and-sets and a max register


def _mstas_tas(prog, proc, op_id, args, ctx):
    c = yield (("curr",), ("read_max",))
    w = yield (("TS", c), ("test_and_set",))
    return w


def _mstas_read(prog, proc, op_id, args, ctx):
    c = yield (("curr",), ("read_max",))
    v = yield (("TS", c), ("read",))
    return v


def _mstas_reset(prog, proc, op_id, args, ctx):
    c = yield (("curr",), ("read_max",))
    v = yield (("TS", c), ("read",))
    if v == 1:
        yield (("curr",), ("write_max", c + 1))
    return OK


def _mstas_budget(prog, name, workload):
    return 3 if name == "reset" else 2


def _mstas_invariant(trace: Trace) -> list:
    round_of = {}
    for s in trace.steps:
        if s.key[0] == "TS":
            round_of[s.op] = s.key[1]
    per_round: dict = {}
    for e in trace.history.events:
        if e.kind == RESPOND and e.name == "test_and_set" and e.payload == 0:
            per_round.setdefault(round_of.get(e.op), []).append(e.op)
    return [f"round {rnd} acquired twice ({ops})"
            for rnd, ops in sorted(per_round.items()) if len(ops) > 1]


def multi_shot_tas(n: int) -> Program:
    return Program(
        "multiShotTAS", n, specs_mod.multishot_test_and_set_spec(),
        ({("curr",): ObjectSpec(MAX_REGISTER, init=1)},
         {"TS": ObjectSpec(TEST_AND_SET, init=0)}),
        {"test_and_set": _mstas_tas, "read": _mstas_read, "reset": _mstas_reset},
        WAIT_FREE,
        "resettable test-and-set: a max register points at the current round's "
        "one-shot instance, reset advances the pointer once the round is won",
        "a max register and a growable array of readable test-and-sets",
        budgets=_mstas_budget,
        invariant=_mstas_invariant)


# ---------------------------------------------------------------------------
# readable fetch-and-increment from an array of test-and-sets


def _tas_scan(array: str, action: str):
    """Walk array slots until one reads/acquires as 0; return the index."""
    i = 0
    while True:
        v = yield ((array, i), (action,))
        if v == 0:
            return i
        i += 1


def _finc_inc(prog, proc, op_id, args, ctx):
    i = yield from _tas_scan("M", "test_and_set")
    return i


def _finc_read(prog, proc, op_id, args, ctx):
    i = yield from _tas_scan("M", "read")
    return i


def _finc_budget(prog, name, workload):
    return _count_ops(workload, ("fetch_and_increment",)) + 1


def _finc_invariant(trace: Trace) -> list:
    taken: dict = {}
    out = []
    for e in trace.history.events:
        if e.kind == RESPOND and e.name == "fetch_and_increment":
            if e.payload in taken:
                out.append(f"value {e.payload} handed to both {taken[e.payload]} "
                           f"and {e.op}")
            taken[e.payload] = e.op
    return out


def _finc_rule(trace: Trace):
    """Each operation is linearized at its step that came up 0."""
    points = []
    for s in trace.steps:
        if s.key[0] == "M" and s.response == 0:
            points.append((s.op, s.index, 0))
    return points


def fetch_inc_from_tas(n: int) -> Program:
    return Program(
        "fetchIncFromTAS", n, specs_mod.fetch_increment_spec(),
        ({}, {"M": ObjectSpec(TEST_AND_SET, init=0)}),
        {"fetch_and_increment": _finc_inc, "read": _finc_read},
        LOCK_FREE,
        "readable fetch-and-increment: value k is owned by whoever wins the "
        "k-th test-and-set, readers scan for the first unset slot",
        "a growable array of readable test-and-sets",
        budgets=_finc_budget,
        point_rule=_finc_rule,
        invariant=_finc_invariant)


# ---------------------------------------------------------------------------
# set (put / take) from test-and-sets and a readable fetch-and-increment


def _set_put(prog, proc, op_id, args, ctx):
    if prog.params.get("atomic_max"):
        m = yield (("Max",), ("fetch_add", 1))
    else:
        c = yield from _tas_scan("Max", "test_and_set")
        m = c + 1
    yield (("Items", m), ("write", args[0]))
    return OK


def _set_take(prog, proc, op_id, args, ctx):
    taken_old = 0
    max_old = 0
    while True:
        taken_new = 0
        if prog.params.get("atomic_max"):
            mx = yield (("Max",), ("fetch_add", 0))
            max_new = mx - 1
        else:
            max_new = yield from _tas_scan("Max", "read")
        for c in range(1, max_new + 1):
            x = yield (("Items", c), ("read",))
            if x is not BOT:
                w = yield (("TS", c), ("test_and_set",))
                if w == 0:
                    return x
                taken_new += 1
        if taken_new == taken_old and max_new == max_old:
            return EMPTY
        taken_old, max_old = taken_new, max_new


def _set_budget(prog, name, workload):
    p = _count_ops(workload, ("put",))
    if name == "put":
        return p + 2
    return (2 * p + 2) * (3 * p + 2)


def _set_rule(trace: Trace):
    """put at its slot write, a successful take at its slot grab, an empty
    take at the last step of its final capacity read."""
    last_max_read = {}
    for s in trace.steps:
        if s.key[0] == "Max" and s.action[0] in ("read", "fetch_add"):
            last_max_read[s.op] = s.index
    points = []
    for s in trace.steps:
        if s.key[0] == "Items" and s.action[0] == "write":
            points.append((s.op, s.index, 0))
        elif s.key[0] == "TS" and s.response == 0:
            points.append((s.op, s.index, 0))
    empties = {e.op for e in trace.history.events
               if e.kind == "respond" and e.payload == EMPTY}
    for op in empties:
        points.append((op, last_max_read[op], 1))
    return points


def _set_validate(prog, workload):
    seen = set()
    for seq in workload.per_proc:
        for name, args in seq:
            if name == "put":
                if args[0] in seen:
                    raise ConfigurationError(
                        f"set workloads need distinct items, {args[0]!r} repeats")
                seen.add(args[0])


def _set_invariant(trace: Trace) -> list:
    out = []
    write_idx = {}
    for s in trace.steps:
        if s.key[0] == "Items" and s.action[0] == "write":
            write_idx.setdefault(s.action[1], s.index)
    grab_idx = {}  # take op -> index of the slot grab it won
    for s in trace.steps:
        if s.key[0] == "TS" and s.action[0] == "test_and_set" and s.response == 0:
            grab_idx[s.op] = s.index
    returned: dict = {}
    for e in trace.history.events:
        if e.kind != RESPOND or e.name != "take" or e.payload == EMPTY:
            continue
        x = e.payload
        if x in returned:
            out.append(f"item {x!r} returned by both {returned[x]} and {e.op}")
        returned[x] = e.op
        if x not in write_idx:
            out.append(f"item {x!r} returned but never written to a slot")
        elif e.op in grab_idx and grab_idx[e.op] < write_idx[x]:
            out.append(f"item {x!r} grabbed at step {grab_idx[e.op]} before "
                       f"its write at step {write_idx[x]}")
    return out


def set_from_tas(n: int, atomic_max: bool = False, values: int = 3) -> Program:
    static = {}
    if atomic_max:
        static[("Max",)] = ObjectSpec(FETCH_ADD, init=1)
        arrays = {"Items": ObjectSpec(REGISTER, init=BOT),
                  "TS": ObjectSpec(TEST_AND_SET, init=0)}
        base = "test-and-sets, registers and an atomic readable fetch-and-increment"
    else:
        arrays = {"Items": ObjectSpec(REGISTER, init=BOT),
                  "TS": ObjectSpec(TEST_AND_SET, init=0),
                  "Max": ObjectSpec(TEST_AND_SET, init=0)}
        base = ("test-and-sets and registers; the capacity counter is the "
                "nested test-and-set fetch-and-increment")
    return Program(
        "setFromTAS", n, specs_mod.set_spec(),
        (static, arrays),
        {"put": _set_put, "take": _set_take},
        LOCK_FREE,
        "unordered set: put claims a fresh slot via fetch-and-increment and "
        "writes the item, take sweeps the slots trying to own one, declaring "
        "empty after two identical sweeps",
        base,
        params={"atomic_max": atomic_max, "values": values},
        budgets=_set_budget,
        point_rule=_set_rule,
        validate=_set_validate,
        invariant=_set_invariant)


# ---------------------------------------------------------------------------
# collect-based counter: linearizable but nothing stronger (negative example)


def _cc_inc(prog, proc, op_id, args, ctx):
    c = ctx.get("count", 0) + 1
    yield (("C", proc), ("write", c))
    ctx.set("count", c)
    return OK


def _cc_read(prog, proc, op_id, args, ctx):
    total = 0
    for j in range(prog.n):
        v = yield (("C", j), ("read",))
        total += v
    return total


def _cc_budget(prog, name, workload):
    return 1 if name == "inc" else prog.n


def collect_counter(n: int) -> Program:
    return Program(
        "collectCounter", n, specs_mod.counter_spec(),
        ({("C", i): ObjectSpec(REGISTER, init=0) for i in range(n)}, {}),
        {"inc": _cc_inc, "read": _cc_read},
        WAIT_FREE,
        "counter from a collect: each process counts in its own register and "
        "readers sum the registers; linearizable, but a reader's value can be "
        "forced retroactively, so no prefix-stable linearization exists",
        "one single-writer register per process",
        catalog=False,
        budgets=_cc_budget,
        strongly_linearizable=False)


# ---------------------------------------------------------------------------
# registry and stock workloads


PROGRAMS: dict[str, Callable[..., Program]] = {
    "maxRegisterFA": max_register_fa,
    "snapshotFA": snapshot_fa,
    "simpleTypeFromSnapshot": simple_type_from_snapshot,
    "readableTAS": readable_tas,
    "multiShotTAS": multi_shot_tas,
    "fetchIncFromTAS": fetch_inc_from_tas,
    "setFromTAS": set_from_tas,
    "collectCounter": collect_counter,
}

CATALOG = ("maxRegisterFA", "snapshotFA", "simpleTypeFromSnapshot",
           "readableTAS", "multiShotTAS", "fetchIncFromTAS", "setFromTAS")


def make_program(name: str, n: int, **params) -> Program:
    try:
        factory = PROGRAMS[name]
    except KeyError:
        raise ConfigurationError(f"unknown program {name!r}")
    return factory(n, **params)


def _pattern(n: int, ops: int, pick) -> Workload:
    return Workload(n, tuple(tuple(pick(i, j) for j in range(ops))
                             for i in range(n)))


def default_workload(prog: Program, ops: int = 2) -> Workload:
    """A mixed read/write workload sized to the bounded checking domain."""
    n = prog.n
    values = prog.params.get("values", 3)

    def val(i, j):
        return ((i + j) % values) + 1

    name = prog.name
    if name == "maxRegisterFA":
        w = _pattern(n, ops, lambda i, j: ("write_max", (val(i, j),))
                     if (i + j) % 2 == 0 else ("read_max", ()))
    elif name == "snapshotFA":
        w = _pattern(n, ops, lambda i, j: ("update", (val(i, j),))
                     if (i + j) % 2 == 0 else ("scan", ()))
    elif name == "simpleTypeFromSnapshot":
        if prog.params.get("spec") == "counter":
            w = _pattern(n, ops, lambda i, j: ("inc", ())
                         if (i + j) % 2 == 0 else ("read", ()))
        else:
            w = _pattern(n, ops, lambda i, j: ("write_max", (val(i, j),))
                         if (i + j) % 2 == 0 else ("read_max", ()))
    elif name == "readableTAS":
        w = _pattern(n, ops, lambda i, j: ("test_and_set", ())
                     if (i + j) % 2 == 0 else ("read", ()))
    elif name == "multiShotTAS":
        cycle = (("test_and_set", ()), ("read", ()), ("reset", ()))
        w = _pattern(n, ops, lambda i, j: cycle[(2 * i + j) % 3])
    elif name == "fetchIncFromTAS":
        w = _pattern(n, ops, lambda i, j: ("fetch_and_increment", ())
                     if (i + j) % 2 == 0 else ("read", ()))
    elif name == "setFromTAS":
        counter = iter(range(1, n * ops + 1))
        w = _pattern(n, ops, lambda i, j: ("put", (next(counter),))
                     if (i + j) % 2 == 0 else ("take", ()))
    elif name == "collectCounter":
        w = _pattern(n, ops, lambda i, j: ("inc", ())
                     if (i + j) % 2 == 0 else ("read", ()))
    else:
        raise ConfigurationError(f"no stock workload for {name!r}")
    prog.validate_workload(w)
    return w


def named_workload(prog: Program, label: str, ops: int = 2) -> Workload:
    if label == "default":
        return default_workload(prog, ops)
    if label == "negwitness" and prog.name == "collectCounter":
        if prog.n != 3:
            raise ConfigurationError("the negwitness workload needs n = 3")
        w = Workload(3, ((("inc", ()),),
                         (("inc", ()), ("inc", ())),
                         (("read", ()),)))
        prog.validate_workload(w)
        return w
    raise ConfigurationError(f"{prog.name} has no workload named {label!r}")
