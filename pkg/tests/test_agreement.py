"""Agreement harness: profiles, protocol runs, audits, ordering conformance."""

import pytest

from linlab.agreement import (
    PROFILE_TAGS,
    AgreementRun,
    OrderingProfile,
    _digest_tape,
    agreement_workload,
    algorithm_b_program,
    atomic_object_program,
    check_k_ordering,
    check_step_discipline,
    profile_for,
    run_algorithm_b,
    sweep_agreement,
    validate_agreement,
    verify_collect_claim,
)
from linlab.checker import Bounds, RunGraph
from linlab.errors import CapacityError, ConfigurationError, HarnessError
from linlab.model import BOT, EMPTY, EPS, OK, History, OpId
from linlab.objects import REGISTER, ObjectSpec
from linlab.programs import WAIT_FREE, Program
from linlab.scheduler import Crash, StepRecord, Trace, Workload
from linlab.specs import queue_spec


# ---------------------------------------------------------------------------
# profiles


def test_profile_tags_all_construct():
    for tag in PROFILE_TAGS:
        kw = {}
        if tag.startswith("stuttering"):
            kw["m"] = 1
        if tag == "outOfOrderQueue":
            kw["k"] = 1
        prof = profile_for(tag, 3, **kw)
        assert prof.tag == tag and prof.n == 3
        assert len(prof.prop) == 3 and len(prof.dec) == 3
        assert prof.seq_spec().initial_state is not None
        d = prof.describe()
        assert d["object"] == tag and d["n"] == 3


def test_profile_argument_checks():
    with pytest.raises(ConfigurationError):
        profile_for("queue", 1)
    with pytest.raises(ConfigurationError):
        profile_for("stutteringQueue", 2)  # missing m
    with pytest.raises(ConfigurationError):
        profile_for("outOfOrderQueue", 3, k=3)  # k must stay below n
    with pytest.raises(ConfigurationError):
        profile_for("outOfOrderQueue", 3)
    with pytest.raises(ConfigurationError):
        profile_for("dequeue", 3)


def test_profile_shapes():
    q = profile_for("queue", 3)
    assert q.k == 1
    assert q.prop[1] == (("enq", (1,)),)
    assert q.dec[1] == (("deq", ()),)
    s = profile_for("stack", 3)
    assert len(s.dec[0]) == 4  # up to n+1 pops to find the deepest survivor
    st = profile_for("stutteringQueue", 2, m=2)
    assert len(st.prop[0]) == 3  # m+1 insertions per process
    assert st.loose_winner
    ooo = profile_for("outOfOrderQueue", 3, k=2)
    assert ooo.k == 2 and ooo.ooo_k == 2


def test_decision_maps():
    qd = profile_for("queue", 3).d
    assert qd(0, (OK, 2)) == 2
    assert qd(0, (OK, 0)) == 0
    assert qd(0, (OK, EMPTY)) == 0   # fallback on impossible inputs
    assert qd(0, ()) == 0
    sd = profile_for("stack", 3).d
    assert sd(1, (OK, 0, EPS, EPS)) == 0   # empty answers are skipped
    assert sd(1, (OK, EPS, 1, EPS)) == 1
    assert sd(1, (OK, 2, 1, 0)) == 0       # deepest = popped last
    assert sd(1, (OK, EPS, EPS, EPS)) == 0


def test_atomic_object_program():
    prof = profile_for("queue", 2)
    prog = atomic_object_program(prof)
    assert sorted(prog.ops) == ["deq", "enq"]
    assert prog.params["atomicTarget"] is True
    assert prog.step_budget("enq", None) == 1
    assert prog.layout[0] == {("O",): prof.object_spec}


def test_agreement_workload():
    prof = profile_for("queue", 2)
    w = agreement_workload(prof, (5, 6))
    assert w.per_proc == ((("agree", (5,)),), (("agree", (6,)),))


# ---------------------------------------------------------------------------
# protocol construction guards


def test_algorithm_b_guards():
    prof2, prof3 = profile_for("queue", 2), profile_for("queue", 3)
    with pytest.raises(ConfigurationError):  # process count mismatch
        algorithm_b_program(atomic_object_program(prof3), prof2, (5, 6))
    with pytest.raises(ConfigurationError):  # wrong input count
        algorithm_b_program(atomic_object_program(prof2), prof2, (5,))
    clash = Program("clash", 2, queue_spec(),
                    ({("M", 0): ObjectSpec(REGISTER)}, {}), {}, WAIT_FREE,
                    "key collision probe", "a register", catalog=False)
    with pytest.raises(ConfigurationError):
        algorithm_b_program(clash, prof2, (5, 6))
    grower = Program("grower", 2, queue_spec(),
                     ({}, {"A": ObjectSpec(REGISTER)}), {}, WAIT_FREE,
                     "growable array probe", "registers", catalog=False)
    with pytest.raises(ConfigurationError):
        algorithm_b_program(grower, prof2, (5, 6))


def test_protocol_has_a_step_budget():
    prof = profile_for("queue", 2)
    bprog = algorithm_b_program(atomic_object_program(prof), prof, (5, 6))
    w = agreement_workload(prof, (5, 6))
    b = bprog.step_budget("agree", w)
    assert isinstance(b, int) and b > 0


# ---------------------------------------------------------------------------
# single runs


def test_round_robin_run_queue():
    prof = profile_for("queue", 3)
    run = run_algorithm_b(None, prof, (10, 20, 30))
    assert run.decisions == (10, 10, 10)
    assert run.winners == (0, 0, 0)
    assert run.crashed == () and run.inconclusive == ()
    assert set(run.converged) == {0, 1, 2}
    assert run.proposals == (10, 20, 30)
    assert all(t >= 1 for t in run.timestamps)
    assert run.atomic_target
    j = run.json()
    assert j["schemaVersion"] == 1 and j["decisions"] == [10, 10, 10]
    rep = validate_agreement([run], prof.k)
    assert rep["ok"] and rep["runs"] == 1 and rep["failures"] == []
    assert check_step_discipline(run) == []
    assert verify_collect_claim(run)


def test_round_robin_run_stack():
    prof = profile_for("stack", 2)
    run = run_algorithm_b(None, prof, (7, 8))
    assert len(set(d for d in run.decisions if d is not BOT)) == 1
    assert validate_agreement([run], 1)["ok"]
    assert verify_collect_claim(run)


def test_crashed_process_is_excused():
    prof = profile_for("queue", 2)
    sched = [Crash(0)] + [1] * 40
    # trim: run until proc 1 finishes, feeding it alone
    run = run_algorithm_b(None, prof, (5, 6), schedule=_until_done(prof, sched))
    assert run.crashed == (0,)
    assert run.decisions[0] is BOT
    assert run.decisions[1] == 6 and run.winners[1] == 1
    assert validate_agreement([run], 1)["ok"]


def _until_done(profile, candidate):
    """Replay prefix lengths until the run completes with no eligible work."""
    impl = atomic_object_program(profile)
    bprog = algorithm_b_program(impl, profile, (5, 6))
    w = agreement_workload(profile, (5, 6))
    from linlab.scheduler import Simulation
    for cut in range(1, len(candidate) + 1):
        sim = Simulation(bprog.layout, bprog.start, w)
        try:
            sim.run(candidate[:cut])
        except Exception:
            return candidate[:cut - 1]
        if sim.finished():
            return candidate[:cut]
    return candidate


def test_starved_schedule_is_inconclusive_not_an_error():
    prof = profile_for("queue", 2)
    run = run_algorithm_b(None, prof, (5, 6), schedule=[0, 0, 0])
    assert 0 in run.inconclusive and 1 in run.inconclusive
    assert run.decisions == (BOT, BOT)
    rep = validate_agreement([run], 1)
    assert rep["ok"] and rep["inconclusiveRuns"] == 1


def test_decision_map_pointing_at_silent_process_trips_the_harness():
    base = profile_for("queue", 3)
    rogue = OrderingProfile(
        "queue", 3, 1, base.prop, base.dec, lambda i, r: 2,
        base.object_spec, base.spec_factory)
    with pytest.raises(HarnessError):
        run_algorithm_b(None, rogue, (10, 20, 30), schedule=[0] * 20)


def test_validate_agreement_failure_modes():
    prof = profile_for("queue", 2)
    run = run_algorithm_b(None, prof, (5, 6))
    run.decisions = (5, 99)
    rep = validate_agreement([run], 1)
    assert not rep["ok"]
    problems = rep["failures"][0]["problems"]
    assert any(p.startswith("validity") for p in problems)
    assert any(p.startswith("agreement") for p in problems)

    run2 = run_algorithm_b(None, prof, (5, 6))
    run2.decisions = (BOT, 6)
    rep2 = validate_agreement([run2], 1)
    assert not rep2["ok"]
    assert any(p.startswith("termination")
               for p in rep2["failures"][0]["problems"])


# ---------------------------------------------------------------------------
# audits


def test_collect_audit_rejects_forged_snapshots():
    prof = profile_for("queue", 2)
    run = run_algorithm_b(None, prof, (5, 6))
    assert verify_collect_claim(run)
    p = run.converged[0]
    key, _state = run.collects[p]["r"][0]
    run.collects[p]["r"] = ((key, (1, 0, 1, 0)),)  # not what the run saw
    assert not verify_collect_claim(run)


def test_collect_audit_rejects_missing_and_miskeyed_records():
    prof = profile_for("queue", 2)
    run = run_algorithm_b(None, prof, (5, 6))
    p = run.converged[0]
    saved = run.collects[p]
    run.collects = {q: c for q, c in run.collects.items() if q != p}
    assert not verify_collect_claim(run)
    run.collects[p] = {"e1": saved["e1"], "e2": saved["e2"],
                       "r": ((("X",), ()),)}
    assert not verify_collect_claim(run)


def test_step_discipline_flags_bad_traces():
    mk = OpId(0, 0)
    h = History()
    bad1 = AgreementRun(
        tag="queue", inputs=(1, 2), decisions=(1, 1), winners=(0, 0),
        crashed=(), converged=(), inconclusive=(), proposals=(1, 2),
        timestamps=(1, 1), r_keys=(("O",),), collects={},
        trace=Trace(2, (0,), (StepRecord(0, 0, mk, ("O",), ("enq", 1), OK),),
                    h, (), []),
        profile_args=("queue", 2, None, None))
    found = check_step_discipline(bad1)
    assert len(found) == 1 and "without announcing a timestamp" in found[0]

    steps = (
        StepRecord(0, 0, mk, ("T", 0), ("read",), 0),
        StepRecord(1, 0, mk, ("O",), ("enq", 1), OK),
    )
    bad2 = AgreementRun(
        tag="queue", inputs=(1, 2), decisions=(1, 1), winners=(0, 0),
        crashed=(), converged=(), inconclusive=(), proposals=(1, 2),
        timestamps=(1, 1), r_keys=(("O",),), collects={},
        trace=Trace(2, (0, 0), steps, h, (), []),
        profile_args=("queue", 2, None, None))
    found = check_step_discipline(bad2)
    assert len(found) == 1 and "mutated" in found[0]


# ---------------------------------------------------------------------------
# response-tape digest


def test_digest_tape_regions():
    # head 3, n=2, one collect read, tail 2; collect blocks are 5 wide
    args = dict(head_len=3, n=2, r_len=1, tail_len=2)
    head = (OK, 1, OK)
    failed = (1, 0, "S0", 0, 0)      # t1 != t2
    quiet = (1, 1, "S1", 1, 1)       # converged

    assert _digest_tape((), **args) == ()
    assert _digest_tape(head, **args) == head
    # a finished failed block is dead weight
    assert _digest_tape(head + failed + quiet, **args) == head + quiet
    # a live partial block must stay
    partial = (1, 1, "S1")
    assert _digest_tape(head + failed + partial, **args) == head + partial
    # once anything follows the quiet block its contents are dead
    assert _digest_tape(head + quiet + (OK,), **args) == head + ("#",) + (OK,)
    # with the whole decision tail recorded the tape no longer matters
    assert _digest_tape(head + quiet + (OK, 0), **args) == ("#",)
    assert _digest_tape(head + failed + quiet + (OK, 0), **args) == ("#",)


def test_digest_fold_preserves_decision_profiles():
    prof = profile_for("queue", 2)
    impl = atomic_object_program(prof)
    bprog = algorithm_b_program(impl, prof, (5, 6))
    w = agreement_workload(prof, (5, 6))
    bounds = Bounds(crash_budget=1, node_limit=300_000)
    folded = RunGraph(bprog, w, bounds, lean=True)
    assert bprog.config_key is not None
    bprog.config_key = None
    raw = RunGraph(bprog, w, bounds, lean=True)
    assert len(folded.nodes) < len(raw.nodes)

    def profiles(graph):
        out = set()
        for key, edges in graph.nodes.items():
            if edges:
                continue
            per_proc = key[0][1]
            out.add(tuple(dict(e[5]).get("decision", BOT) for e in per_proc))
        return out

    assert profiles(folded) == profiles(raw)


# ---------------------------------------------------------------------------
# exhaustive sweep and sequential conformance


def test_sweep_agreement_queue_two_processes():
    prof = profile_for("queue", 2)
    v = sweep_agreement(prof, (5, 6), collect_limit=50)
    assert v.ok
    assert v.k == 1 and v.distinct_decisions <= 1
    assert v.terminal_classes > 0 and v.nodes > 0
    assert v.collects_checked > 0 and v.collects_ok
    assert v.failures == ()
    for pr in v.decision_profiles:
        decided = {d for d in pr if d is not None}
        assert decided <= {5, 6} and len(decided) <= 1
    assert v.json()["ok"] is True


def test_sweep_agreement_respects_node_limit():
    prof = profile_for("queue", 2)
    with pytest.raises(CapacityError):
        sweep_agreement(prof, (5, 6), node_limit=50)


@pytest.mark.parametrize("tag,kw,expect_ok", [
    ("queue", {}, True),
    ("stack", {}, True),
    ("multiplicityQueue", {}, True),
    ("multiplicityStack", {}, True),
    ("stutteringQueue", {"m": 1}, True),
    ("stutteringStack", {"m": 1}, False),   # the winner can vanish mid-stack
    ("outOfOrderQueue", {"k": 1}, True),
])
def test_sequential_conformance_small(tag, kw, expect_ok):
    prof = profile_for(tag, 2, **kw)
    rep = check_k_ordering(prof)
    assert rep.ok is expect_ok, rep.violations
    assert rep.alphas > 0 and rep.nodes > 0
    if expect_ok:
        assert rep.max_outcomes <= prof.k
        assert rep.violations == ()
    else:
        assert rep.violations != ()


def test_out_of_order_window_two_leaks_past_its_bound():
    rep = check_k_ordering(profile_for("outOfOrderQueue", 3, k=2))
    assert not rep.ok
    assert rep.violations != ()


def test_conformance_capacity():
    with pytest.raises(CapacityError):
        check_k_ordering(profile_for("stack", 3), max_nodes=5)
