"""Deterministic scheduler: stepping, crashes, forks, replay."""

import random

import pytest

from linlab.errors import (
    CapacityError,
    ConfigurationError,
    IntegrityError,
    SchedulingError,
)
from linlab.model import INVOKE, OK, RESPOND, OpId, validate_history
from linlab.objects import REGISTER, RELAXED_QUEUE, ObjectSpec
from linlab.scheduler import (
    Crash,
    Simulation,
    Workload,
    enumerate_runs,
    random_run,
    replay_diff,
    run_schedule,
    schedule_from_json,
    schedule_json,
    trace_from_json,
)

R = ("R",)
Q = ("Q",)

LAYOUT = ({R: ObjectSpec(REGISTER)}, {})
BRANCHY = ({Q: ObjectSpec(RELAXED_QUEUE, params=(("m", 1), ("mode", "stuttering")))}, {})


def start(proc, op_id, name, args, ctx):
    """Operation code for a plain register with a two-step write."""
    if name == "write2":
        def g():
            yield (R, ("read",))      # observe, then write: two shared steps
            ctx.set("last", args[0])  # buffered until the op responds
            yield (R, ("write", args[0]))
            return OK
        return g()
    if name == "read":
        def g():
            v = yield (R, ("read",))
            return v
        return g()
    if name == "recall":
        def g():
            return ctx.get("last", -1)
            yield  # pragma: no cover - makes this a generator
        return g()
    raise AssertionError(name)


def start_branchy(proc, op_id, name, args, ctx):
    def g():
        yield (Q, ("enq", args[0]))
        return OK
    return g()


def sim_for(workload, choices=()):
    return Simulation(LAYOUT, start, workload, choices)


W2 = Workload(2, ((("write2", (5,)),), (("read", ()),)))


def test_workload_validation():
    with pytest.raises(ConfigurationError):
        Workload(2, ((("read", ()),),))  # wrong length
    with pytest.raises(ConfigurationError):
        Workload(1, ((("write2", 5),),))  # args must be a tuple
    w = Workload(1, ((("read", ()),),))
    assert Workload.from_json(w.json()) == w
    assert Workload.from_json(W2.json()) == W2


def test_invocation_and_response_bundling():
    sim = sim_for(W2)
    sim.step(0)
    h = sim.history()
    # invocation rides with the first step, no response yet
    assert [e.kind for e in h] == [INVOKE]
    sim.step(0)
    h = sim.history()
    assert [e.kind for e in h] == [INVOKE, RESPOND]
    assert h.events[1].payload == OK
    assert sim.finished() is False
    sim.step(1)
    assert sim.finished()
    assert sim.history().response(OpId(1, 0)).payload == 5
    assert validate_history(sim.history()) == []


def test_step_records_and_trace():
    sim = sim_for(W2).run((0, 0, 1))
    t = sim.trace()
    assert t.n == 2
    assert t.schedule == (0, 0, 1)
    assert [s.action for s in t.steps] == [("read",), ("write", 5), ("read",)]
    assert [s.response for s in t.steps] == [0, OK, 5]
    assert t.steps[2].op == OpId(1, 0)
    assert t.crashes == ()
    d = t.json()
    assert d["schemaVersion"] == 1
    back = trace_from_json(d)
    assert back.steps == t.steps
    assert back.history == t.history
    assert back.final_objects == t.final_objects
    assert back.schedule == t.schedule


def test_schedule_json_roundtrip():
    sched = (0, Crash(1), 0)
    assert schedule_from_json(schedule_json(sched)) == sched
    with pytest.raises(ConfigurationError):
        schedule_from_json([0, "crash"])
    with pytest.raises(ConfigurationError):
        schedule_from_json([["crash", 1, 2]])


def test_interleaving_changes_observation():
    # reader runs between the writer's two steps: still sees the old value
    sim = sim_for(W2).run((0, 1, 0))
    assert sim.history().response(OpId(1, 0)).payload == 0
    assert sim.table.get(R).state == 5


def test_zero_step_operation():
    w = Workload(1, ((("recall", ()),),))
    sim = sim_for(w)
    assert sim.prepare(0) == 0
    sim.commit(0)
    h = sim.history()
    assert [e.kind for e in h] == [INVOKE, RESPOND]
    assert h.events[1].payload == -1
    assert sim.trace().steps == ()
    assert sim.trace().schedule == (0,)


def test_local_memory_commits_only_on_response():
    w = Workload(1, ((("write2", (3,)), ("recall", ())),))
    sim = sim_for(w).run((0, 0, 0))
    assert sim.history().response(OpId(0, 1)).payload == 3


def test_crash_discards_buffered_locals():
    w = Workload(1, ((("write2", (3,)), ("recall", ())),))
    sim = sim_for(w)
    sim.step(0)  # the op has run ctx.set by now, but nothing is committed
    assert sim.procs[0].local == {}
    fin = sim.fork()
    sim.crash(0)
    assert sim.procs[0].local == {}  # crash drops the buffer
    fin.run((0, 0))
    assert fin.procs[0].local == {"last": 3}
    assert fin.history().response(OpId(0, 1)).payload == 3


def test_crash_semantics():
    sim = sim_for(W2)
    sim.step(0)
    sim.crash(0)
    with pytest.raises(SchedulingError):
        sim.step(0)
    with pytest.raises(SchedulingError):
        sim.crash(0)  # no work remaining
    sim.step(1)
    h = sim.history()
    assert h.pending_ops() == (OpId(0, 0),)  # crashed op never responds
    assert sim.finished()
    t = sim.trace()
    assert t.crashes == ((1, 0),)  # item index 1, process 0
    assert t.schedule == (0, Crash(0), 1)
    # the write's first step happened, the write itself did not
    assert t.final_objects[0]["state"] == "0"


def test_crash_requires_remaining_work():
    w = Workload(1, ((("read", ()),),))
    sim = sim_for(w).run((0,))
    with pytest.raises(SchedulingError):
        sim.crash(0)


def test_eligible_and_run_item():
    sim = sim_for(W2)
    assert sim.eligible() == [0, 1]
    sim.run_item(Crash(1))
    assert sim.eligible() == [0]
    with pytest.raises(ConfigurationError):
        sim.run_item("zero")
    with pytest.raises(SchedulingError):
        sim.step(1)


# ---------------------------------------------------------------------------
# branching steps and the ticket stream


def test_branching_needs_tickets():
    w = Workload(1, ((("enq", (4,)),),))
    sim = Simulation(BRANCHY, start_branchy, w)
    assert sim.prepare(0) == 2
    with pytest.raises(SchedulingError):
        sim.commit(0)  # no ticket stream
    sim = Simulation(BRANCHY, start_branchy, w, choices=(1,))
    sim.step(0)
    assert sim.table.get(Q).state == ((), 1, 0)  # ticket 1 = the stutter branch
    assert sim.trace().steps[0].choice == 1
    sim = Simulation(BRANCHY, start_branchy, w)
    sim.prepare(0)
    with pytest.raises(SchedulingError):
        sim.commit(0, choice=5)


def test_explicit_choice_wins_over_stream():
    w = Workload(1, ((("enq", (4,)),),))
    sim = Simulation(BRANCHY, start_branchy, w, choices=(1,))
    sim.step(0, choice=0)
    assert sim.table.get(Q).state == ((4,), 0, 0)


# ---------------------------------------------------------------------------
# forking


def test_fork_continues_identically():
    sim = sim_for(W2)
    sim.step(0)  # writer mid-op, generator live
    copy = sim.fork()
    for s in (sim, copy):
        s.step(1)
        s.step(0)
    assert sim.history() == copy.history()
    assert sim.config() == copy.config()
    assert sim.trace().json() == copy.trace().json()


def test_fork_isolation():
    sim = sim_for(W2)
    sim.step(0)
    copy = sim.fork()
    copy.step(0)
    assert sim.table.get(R).state == 0
    assert copy.table.get(R).state == 5
    assert sim.config() != copy.config()


def test_light_fork_drops_history_keeps_future():
    sim = sim_for(W2)
    sim.step(0)
    lit = sim.fork(light=True)
    full = sim.fork()
    assert len(lit.history()) == 0
    for s in (lit, full):
        s.step(0)
        s.step(1)
    assert lit.config() == full.config()
    # the light fork's trace only covers post-fork steps
    assert len(lit.trace().steps) == 2
    assert len(full.trace().steps) == 3


def test_fork_rejects_nondeterministic_op_code():
    flag = {"flip": False}

    def shifty(proc, op_id, name, args, ctx):
        def g():
            yield (R, ("read",))
            if flag["flip"]:
                yield (R, ("write", 2))
            else:
                yield (R, ("write", 1))
            return OK
        return g()

    w = Workload(1, ((("w", ()),),))
    sim = Simulation(LAYOUT, shifty, w)
    sim.step(0)
    sim.fork()  # honest rebuild passes
    flag["flip"] = True
    with pytest.raises(IntegrityError):
        sim.fork()


def test_config_captures_shared_and_private_state():
    sim = sim_for(W2)
    table0, procs0 = sim.config()
    assert table0 == ((R, 0),)
    assert procs0[0] == (0, False, None, (), None, ())
    sim.step(0)
    _, procs1 = sim.config()
    assert procs1[0][2] == OpId(0, 0)       # live op
    assert procs1[0][3] == (0,)             # consumed responses
    assert procs1[0][4] == (R, ("write", 5))  # parked step
    assert procs1[0][5] == ()               # buffered local not committed yet


# ---------------------------------------------------------------------------
# run enumeration and replay


def test_enumerate_runs_counts_interleavings():
    # 2 one-step ops: exactly the two orders
    w = Workload(2, ((("read", ()),), (("read", ()),)))
    runs = list(enumerate_runs(lambda: sim_for(w)))
    assert len(runs) == 2
    assert all(r.finished() for r in runs)
    scheds = {tuple(r.schedule_log) for r in runs}
    assert scheds == {(0, 1), (1, 0)}


def test_enumerate_runs_with_crashes_and_branches():
    w = Workload(1, ((("enq", (4,)),),))
    runs = list(enumerate_runs(lambda: Simulation(BRANCHY, start_branchy, w, choices=())))
    assert len(runs) == 2  # the two enq outcomes
    runs = list(enumerate_runs(lambda: Simulation(BRANCHY, start_branchy, w),
                               crash_budget=1))
    # crash before the step, or either outcome
    assert len(runs) == 3
    assert sum(1 for r in runs if r.crashes) == 1


def test_enumerate_runs_capacity():
    w = Workload(2, ((("write2", (1,)),), (("write2", (2,)),)))
    with pytest.raises(CapacityError):
        list(enumerate_runs(lambda: sim_for(w), max_runs=3))


def test_random_run_completes():
    w = Workload(2, ((("write2", (1,)), ("read", ())), (("write2", (2,)),)))
    rng = random.Random(7)
    for _ in range(20):
        sim = random_run(lambda: sim_for(w), rng, crash_budget=1)
        assert not sim.eligible()
        assert validate_history(sim.history()) == []


def test_replay_diff_clean_and_tampered():
    sim = sim_for(W2).run((0, 1, 0))
    t = sim.trace()
    assert replay_diff(lambda: sim_for(W2), t) == []
    forged = trace_from_json({**t.json(), "steps": [
        {**s, "response": 99} if i == 2 else s
        for i, s in enumerate(t.json()["steps"])]})
    diffs = replay_diff(lambda: sim_for(W2), forged)
    assert diffs and any("step 2" in d for d in diffs)


def test_replay_diff_reports_aborts():
    sim = sim_for(W2).run((0, 0, 1))
    t = sim.trace()
    bad = trace_from_json({**t.json(), "schedule": [0, 0, 0, 0, 1]})
    diffs = replay_diff(lambda: sim_for(W2), bad)
    assert diffs and diffs[0].startswith("replay aborted")


def test_run_schedule_helper():
    sim = run_schedule(LAYOUT, start, W2, (0, 0, 1))
    assert sim.finished()
    assert sim.history().response(OpId(1, 0)).payload == 5
