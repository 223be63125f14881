"""Deterministic scheduler for simulated shared-memory programs.

A schedule is a sequence of items. Each item names a process and makes it
take exactly one shared-memory step of its current operation; the operation's
invocation is bundled immediately before its first step and the response is
bundled right after its last one. A crash item removes a process for good:
its pending operation, if any, never responds. Replaying the same schedule
(and ticket stream, for objects with branching behaviour) reproduces the same
trace bit for bit.

Operation code is supplied as generators that yield `(object key, action)`
and receive the action's response. Forking a simulation mid-run rebuilds each
live generator by replaying the responses it has consumed so far, which is
exact because operation code is deterministic in its responses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Optional

from .errors import CapacityError, ConfigurationError, IntegrityError, SchedulingError
from .model import Event, History, INVOKE, OpId, RESPOND, _jsonable, _unjson
from .objects import ObjectSpec, ObjectTable


@dataclass(frozen=True)
class Crash:
    proc: int

    def json(self):
        return ["crash", self.proc]


ScheduleItem = Any  # int proc id, or Crash
Schedule = tuple


def schedule_json(schedule: Iterable[ScheduleItem]) -> list:
    return [it.json() if isinstance(it, Crash) else it for it in schedule]


def schedule_from_json(items: Iterable) -> Schedule:
    out = []
    for it in items:
        if isinstance(it, int):
            out.append(it)
        elif isinstance(it, (list, tuple)) and len(it) == 2 and it[0] == "crash":
            out.append(Crash(int(it[1])))
        else:
            raise ConfigurationError(f"bad schedule item {it!r}")
    return tuple(out)


@dataclass(frozen=True)
class Workload:
    """Per-process operation sequences over one shared implementation."""

    n: int
    per_proc: tuple  # n sequences of (name, args-tuple)

    def __post_init__(self):
        if self.n != len(self.per_proc):
            raise ConfigurationError("workload length does not match process count")
        for seq in self.per_proc:
            for name, args in seq:
                if not isinstance(args, tuple):
                    raise ConfigurationError(f"op args must be a tuple, got {args!r}")

    def json(self):
        return {"n": self.n,
                "perProc": [[[name, list(args)] for name, args in seq]
                            for seq in self.per_proc]}

    @staticmethod
    def from_json(d) -> "Workload":
        return Workload(int(d["n"]),
                        tuple(tuple((name, tuple(args)) for name, args in seq)
                              for seq in d["perProc"]))


@dataclass(frozen=True)
class StepRecord:
    index: int
    proc: int
    op: OpId
    key: tuple
    action: tuple
    response: Any
    choice: Any = None

    def json(self):
        d = {"index": self.index, "proc": self.proc, "op": self.op.json(),
             "key": list(self.key), "action": _jsonable(self.action),
             "response": _jsonable(self.response)}
        if self.choice is not None:
            d["choice"] = _jsonable(self.choice)
        return d


@dataclass
class Trace:
    n: int
    schedule: Schedule
    steps: tuple
    history: History
    crashes: tuple  # (item index, proc) pairs
    final_objects: list

    def json(self):
        return {"schemaVersion": 1,
                "n": self.n,
                "schedule": schedule_json(self.schedule),
                "steps": [s.json() for s in self.steps],
                "history": self.history.json(),
                "crashes": [list(c) for c in self.crashes],
                "finalObjects": self.final_objects}


def trace_from_json(d) -> Trace:
    steps = tuple(
        StepRecord(s["index"], s["proc"], OpId(*s["op"]), tuple(s["key"]),
                   _unjson(s["action"]), _unjson(s["response"]),
                   _unjson(s.get("choice")))
        for s in d["steps"])
    return Trace(int(d["n"]), schedule_from_json(d["schedule"]), steps,
                 History.from_json(d["history"]),
                 tuple(tuple(c) for c in d["crashes"]),
                 d["finalObjects"])


class OpContext:
    """Per-process local memory that survives between operations.

    Reads see writes of the current operation first, then committed values.
    Writes stay buffered until the operation responds, so a crashed operation
    leaves no trace and a forked run can regenerate the buffer by replay.
    """

    __slots__ = ("_committed", "_pending")

    def __init__(self, committed: dict):
        self._committed = committed
        self._pending: dict = {}

    def get(self, key, default=None):
        if key in self._pending:
            return self._pending[key]
        return self._committed.get(key, default)

    def set(self, key, value):
        self._pending[key] = value


@dataclass
class _ProcRT:
    ops: tuple
    next_op: int = 0
    gen: Optional[Iterator] = None
    op_id: Optional[OpId] = None
    op_name: Optional[str] = None
    op_args: tuple = ()
    pending: Optional[tuple] = None  # (key, action) the generator is blocked on
    tape: tuple = ()                 # responses already fed to the live generator
    crashed: bool = False
    local: dict = field(default_factory=dict)
    ctx: Optional[OpContext] = None

    def work_remaining(self) -> bool:
        return not self.crashed and (self.gen is not None or self.next_op < len(self.ops))


class Simulation:
    """One run in progress: object table, per-process runtimes, event log."""

    def __init__(self, layout, start: Callable, workload: Workload,
                 choices: Iterable = ()):
        static, arrays = layout
        self.table = ObjectTable(static, arrays)
        self.start = start
        self.workload = workload
        self.events: list[Event] = []
        self.inv_idx: dict[OpId, int] = {}
        self.rsp_idx: dict[OpId, int] = {}
        self.steps: list[StepRecord] = []
        self.crashes: list[tuple] = []
        self.schedule_log: list = []
        self.item_count = 0
        self.choices = list(choices)
        self._choice_ptr = 0
        self.procs = [_ProcRT(tuple(workload.per_proc[p])) for p in range(workload.n)]

    # -- queries ---------------------------------------------------------

    def work_remaining(self, proc: int) -> bool:
        return self.procs[proc].work_remaining()

    def finished(self) -> bool:
        return not any(p.work_remaining() for p in self.procs)

    def eligible(self) -> list[int]:
        return [p for p in range(self.workload.n) if self.procs[p].work_remaining()]

    def history(self) -> History:
        return History(self.events)

    def _conc(self, a: OpId, b: OpId) -> bool:
        ia, ib = self.inv_idx.get(a), self.inv_idx.get(b)
        if ia is None or ib is None:
            return False
        ra = self.rsp_idx.get(a, math.inf)
        rb = self.rsp_idx.get(b, math.inf)
        return not (ra < ib or rb < ia)

    # -- stepping --------------------------------------------------------

    def _invoke(self, proc: int):
        rt = self.procs[proc]
        name, args = rt.ops[rt.next_op]
        rt.op_id = OpId(proc, rt.next_op)
        rt.op_name, rt.op_args = name, args
        payload = None if args == () else args
        self.inv_idx[rt.op_id] = len(self.events)
        self.events.append(Event(INVOKE, rt.op_id, name, payload))
        rt.ctx = OpContext(rt.local)
        rt.gen = self.start(proc, rt.op_id, name, args, rt.ctx)
        rt.tape = ()
        try:
            rt.pending = next(rt.gen)
        except StopIteration as stop:  # operation with no shared step at all
            self._respond(proc, stop.value)

    def _respond(self, proc: int, value):
        rt = self.procs[proc]
        self.rsp_idx[rt.op_id] = len(self.events)
        self.events.append(Event(RESPOND, rt.op_id, rt.op_name, value))
        rt.local.update(rt.ctx._pending)
        rt.gen = None
        rt.pending = None
        rt.op_id = None
        rt.tape = ()
        rt.ctx = None
        rt.next_op += 1

    def prepare(self, proc: int) -> int:
        """Fire the invocation if needed; return how many outcomes this step has."""
        rt = self.procs[proc]
        if rt.crashed:
            raise SchedulingError(f"process {proc} already crashed")
        if rt.gen is None:
            if rt.next_op >= len(rt.ops):
                raise SchedulingError(f"process {proc} has no work left")
            self._invoke(proc)
            if rt.gen is None:  # the op responded without taking a step
                return 0
        return len(self._options(proc))

    def _options(self, proc: int) -> list:
        rt = self.procs[proc]
        key, action = rt.pending
        obj = self.table.get(key)
        from .objects import apply_action
        return apply_action(obj.kind, obj.state, action, proc,
                            dict(obj.spec.params), op=rt.op_id, conc=self._conc)

    def commit(self, proc: int, choice: Optional[int] = None):
        """Apply one shared step of `proc`, picking `choice` among its outcomes."""
        rt = self.procs[proc]
        if rt.pending is None:
            self.schedule_log.append(proc)
            self.item_count += 1
            return
        options = self._options(proc)
        if len(options) > 1:
            if choice is None:
                if self._choice_ptr >= len(self.choices):
                    raise SchedulingError(
                        f"step of process {proc} branches {len(options)} ways "
                        "but the ticket stream is exhausted")
                choice = self.choices[self._choice_ptr]
                self._choice_ptr += 1
            if not 0 <= choice < len(options):
                raise SchedulingError(f"ticket {choice} out of range for {len(options)} outcomes")
        else:
            choice = 0
        key, action = rt.pending
        state2, response, tag = options[choice]
        obj = self.table.get(key)
        obj.state = state2
        self.steps.append(StepRecord(len(self.steps), proc, rt.op_id, key, action,
                                     response, tag))
        self.schedule_log.append(proc)
        self.item_count += 1
        rt.tape = rt.tape + (response,)
        try:
            rt.pending = rt.gen.send(response)
        except StopIteration as stop:
            self._respond(proc, stop.value)

    def step(self, proc: int, choice: Optional[int] = None):
        self.prepare(proc)
        self.commit(proc, choice)

    def crash(self, proc: int):
        rt = self.procs[proc]
        if not rt.work_remaining():
            raise SchedulingError(f"crash of process {proc} needs remaining work")
        rt.crashed = True
        rt.gen = None
        rt.ctx = None
        self.crashes.append((self.item_count, proc))
        self.schedule_log.append(Crash(proc))
        self.item_count += 1

    def run_item(self, item: ScheduleItem):
        if isinstance(item, Crash):
            self.crash(item.proc)
        elif isinstance(item, int):
            self.step(item)
        else:
            raise ConfigurationError(f"bad schedule item {item!r}")

    def run(self, schedule: Iterable[ScheduleItem]) -> "Simulation":
        for item in schedule:
            self.run_item(item)
        return self

    # -- forking ---------------------------------------------------------

    def fork(self, light: bool = False) -> "Simulation":
        """Copy this simulation.  A light fork drops the accumulated history
        (events, step records, schedule log); its future behavior is
        identical but its trace only covers steps taken after the fork."""
        s = Simulation.__new__(Simulation)
        s.table = self.table.clone()
        s.start = self.start
        s.workload = self.workload
        s.events = [] if light else list(self.events)
        s.inv_idx = {} if light else dict(self.inv_idx)
        s.rsp_idx = {} if light else dict(self.rsp_idx)
        s.steps = [] if light else list(self.steps)
        s.crashes = [] if light else list(self.crashes)
        s.schedule_log = [] if light else list(self.schedule_log)
        s.item_count = self.item_count
        s.choices = self.choices
        s._choice_ptr = self._choice_ptr
        s.procs = []
        for proc, rt in enumerate(self.procs):
            rt2 = _ProcRT(rt.ops, rt.next_op, None, rt.op_id, rt.op_name,
                          rt.op_args, rt.pending, rt.tape, rt.crashed,
                          dict(rt.local))
            if rt.gen is not None:
                self._rebuild(proc, rt2)
            s.procs.append(rt2)
        return s

    def _rebuild(self, proc: int, rt: _ProcRT):
        rt.ctx = OpContext(rt.local)
        gen = self.start(proc, rt.op_id, rt.op_name, rt.op_args, rt.ctx)
        at = next(gen)
        for response in rt.tape:
            at = gen.send(response)
        if at != rt.pending:
            raise IntegrityError(
                f"operation code of process {proc} is not deterministic: "
                f"rebuilt step {at!r} differs from {rt.pending!r}")
        rt.gen = gen

    def config(self) -> tuple:
        """Everything the future depends on, as one hashable value."""
        per_proc = []
        for rt in self.procs:
            per_proc.append((rt.next_op, rt.crashed, rt.op_id, rt.tape,
                             rt.pending if rt.gen is not None else None,
                             tuple(sorted(rt.local.items()))))
        return (self.table.frozen(), tuple(per_proc))

    def trace(self) -> Trace:
        return Trace(self.workload.n, tuple(self.schedule_log), tuple(self.steps),
                     self.history(), tuple(self.crashes), self.table.dump())


def run_schedule(layout, start, workload: Workload, schedule,
                 choices: Iterable = ()) -> Simulation:
    sim = Simulation(layout, start, workload, choices)
    sim.run(schedule)
    return sim


def enumerate_runs(make_sim: Callable[[], Simulation], crash_budget: int = 0,
                   max_runs: Optional[int] = None) -> Iterator[Simulation]:
    """Yield one finished simulation per distinct complete run.

    Branches over every eligible process at every point, over crash items
    while the budget lasts, and over every outcome of branching object steps.
    """
    count = 0
    stack = [(make_sim(), crash_budget)]
    while stack:
        sim, budget = stack.pop()
        elig = sim.eligible()
        if not elig:
            count += 1
            if max_runs is not None and count > max_runs:
                raise CapacityError(f"more than {max_runs} complete runs")
            yield sim
            continue
        for proc in reversed(elig):
            if budget > 0:
                child = sim.fork()
                child.crash(proc)
                stack.append((child, budget - 1))
            child = sim.fork()
            fanout = child.prepare(proc)
            if fanout <= 1:
                child.commit(proc)
                stack.append((child, budget))
            else:
                for pick in reversed(range(fanout)):
                    grand = child.fork()
                    grand.commit(proc, pick)
                    stack.append((grand, budget))


def random_run(make_sim: Callable[[], Simulation], rng,
               crash_budget: int = 0) -> Simulation:
    """One complete run drawn uniformly at each decision point."""
    sim = make_sim()
    budget = crash_budget
    while True:
        elig = sim.eligible()
        if not elig:
            return sim
        moves = [("step", p) for p in elig]
        if budget > 0:
            moves += [("crash", p) for p in elig]
        kind, proc = moves[rng.randrange(len(moves))]
        if kind == "crash":
            sim.crash(proc)
            budget -= 1
        else:
            fanout = sim.prepare(proc)
            sim.commit(proc, rng.randrange(fanout) if fanout > 1 else None)


def replay_diff(make_sim: Callable[[], Simulation], trace: Trace,
                choices: Iterable = ()) -> list[str]:
    """Re-run a trace's schedule and report every divergence from it."""
    sim = make_sim()
    if choices:
        sim.choices = list(choices)
    else:
        sim.choices = [s.choice for s in trace.steps if s.choice is not None]
    diffs = []
    try:
        sim.run(trace.schedule)
    except Exception as exc:  # noqa: BLE001 - a replay must report, not die
        return [f"replay aborted: {exc}"]
    if len(sim.steps) != len(trace.steps):
        diffs.append(f"step count {len(sim.steps)} != {len(trace.steps)}")
    for mine, theirs in zip(sim.steps, trace.steps):
        if mine != theirs:
            diffs.append(f"step {theirs.index}: got {mine}, trace has {theirs}")
    if sim.history() != trace.history:
        diffs.append("histories differ")
    if sim.table.dump() != trace.final_objects:
        diffs.append("final object states differ")
    return diffs
