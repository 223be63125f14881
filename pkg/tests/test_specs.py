"""Sequential specs: deterministic types, relaxed containers, the registry."""

import pytest
from hypothesis import given, strategies as st

from linlab.errors import ConfigurationError
from linlab.model import EMPTY, EPS, OK, OpId
from linlab.specs import (
    A_OVERWRITES_B,
    B_OVERWRITES_A,
    BOTH_OVERWRITE,
    COMMUTE,
    SPEC_FACTORIES,
    counter_spec,
    make_spec,
    max_register_spec,
    multiplicity_queue_spec,
    multiplicity_stack_spec,
    out_of_order_queue_spec,
    queue_spec,
    register_spec,
    set_spec,
    snapshot_spec,
    stack_spec,
    stuttering_queue_spec,
    stuttering_stack_spec,
)
from linlab.specs import test_and_set_spec as tas_spec

ALWAYS = lambda a, b: True
NEVER = lambda a, b: False


def step(spec, state, name, *args, op=None, conc=None):
    return sorted(spec.apply_all(state, name, args, op, conc), key=repr)


def test_register():
    spec = register_spec()
    assert spec.apply(0, "write", (7,)) == (7, OK)
    assert spec.apply(7, "read", ()) == (7, 7)
    assert spec.deterministic
    assert spec.valid_state(object())
    with pytest.raises(ConfigurationError):
        spec.apply(0, "cas", (1, 2))


def test_register_relation():
    rel = register_spec().relation
    assert rel(("write", (1,)), ("write", (2,))) == BOTH_OVERWRITE
    assert rel(("write", (1,)), ("read", ())) == A_OVERWRITES_B
    assert rel(("read", ()), ("write", (1,))) == B_OVERWRITES_A
    assert rel(("read", ()), ("read", ())) == COMMUTE


def test_max_register():
    spec = max_register_spec()
    s, r = spec.apply(3, "write_max", (1,))
    assert (s, r) == (3, OK)  # lower writes are absorbed
    assert spec.apply(3, "write_max", (5,)) == (5, OK)
    assert spec.apply(5, "read_max", ()) == (5, 5)
    with pytest.raises(ConfigurationError):
        spec.apply(0, "write_max", (-1,))
    rel = spec.relation
    assert rel(("write_max", (4,)), ("write_max", (4,))) == BOTH_OVERWRITE
    assert rel(("write_max", (4,)), ("write_max", (2,))) == A_OVERWRITES_B
    assert rel(("write_max", (2,)), ("write_max", (4,))) == B_OVERWRITES_A


def test_counter():
    spec = counter_spec()
    assert spec.apply(0, "inc", ()) == (1, OK)
    assert spec.apply(4, "read", ()) == (4, 4)
    assert not spec.valid_state(-1)


def test_snapshot_needs_op_identity():
    spec = snapshot_spec(3)
    s, r = spec.apply((0, 0, 0), "update", (9,), op=OpId(1, 0))
    assert (s, r) == ((0, 9, 0), OK)
    assert spec.apply(s, "scan", ()) == (s, s)
    with pytest.raises(ConfigurationError):
        spec.apply((0, 0, 0), "update", (9,))  # no invoking op


def test_test_and_set():
    spec = tas_spec()
    assert spec.apply(0, "test_and_set", ()) == (1, 0)
    assert spec.apply(1, "test_and_set", ()) == (1, 1)
    assert spec.apply(1, "read", ()) == (1, 1)
    multi = make_spec("multishot_test_and_set")
    assert multi.apply(1, "reset", ()) == (0, OK)


def test_fetch_increment():
    spec = make_spec("fetch_increment")
    assert spec.apply(0, "fetch_and_increment", ()) == (1, 0)
    assert spec.apply(1, "fetch_and_increment", ()) == (2, 1)


def test_set_branches_on_take():
    spec = set_spec()
    assert not spec.deterministic
    s, _ = spec.apply(frozenset(), "put", (1,))
    s, _ = spec.apply(s, "put", (2,))
    outs = step(spec, s, "take")
    assert len(outs) == 2
    assert {r for _, r in outs} == {1, 2}
    assert all(r not in s2 for s2, r in outs)
    assert step(spec, frozenset(), "take") == [(frozenset(), EMPTY)]
    with pytest.raises(ConfigurationError):
        spec.apply(s, "take", ())  # branching state, shortcut must refuse


def test_queue_and_stack_sentinels():
    q = queue_spec()
    assert q.apply((), "deq", ()) == ((), EMPTY)
    s, _ = q.apply((), "enq", (1,))
    s, _ = q.apply(s, "enq", (2,))
    assert q.apply(s, "deq", ()) == ((2,), 1)  # FIFO

    st_ = stack_spec()
    assert st_.apply((), "pop", ()) == ((), EPS)
    s2, _ = st_.apply((), "push", (1,))
    s2, _ = st_.apply(s2, "push", (2,))
    assert st_.apply(s2, "pop", ()) == ((1,), 2)  # LIFO


# ---------------------------------------------------------------------------
# relaxed containers


def test_multiplicity_queue_duplicates_gated_by_concurrency():
    spec = multiplicity_queue_spec()
    s, _ = spec.apply(spec.initial_state, "enq", (5,))
    a, b = OpId(1, 0), OpId(2, 0)
    [(s1, r1)] = step(spec, s, "deq", op=a, conc=ALWAYS)
    assert r1 == 5 and s1 == ((), (5, (a,)))
    # a concurrent second removal may re-answer 5 without consuming anything
    outs = step(spec, s1, "deq", op=b, conc=ALWAYS)
    assert (((), (5, (a, b))), 5) in outs
    assert (((), None), EMPTY) in outs
    # sequential removals may not
    assert step(spec, s1, "deq", op=b, conc=NEVER) == [(((), None), EMPTY)]
    # an enqueue closes the duplication group
    s2, _ = spec.apply(s1, "enq", (7,))
    assert s2[1] is None


def test_multiplicity_queue_group_grows_only_while_concurrent_with_all():
    spec = multiplicity_queue_spec()
    a, b, c = OpId(0, 0), OpId(1, 0), OpId(2, 0)
    state = ((), (5, (a, b)))
    conc_with_a_only = lambda x, y: y == a
    assert step(spec, state, "deq", op=c, conc=conc_with_a_only) == [(((), None), EMPTY)]


def test_multiplicity_stack_mirrors_queue():
    spec = multiplicity_stack_spec()
    s, _ = spec.apply(spec.initial_state, "push", (3,))
    a, b = OpId(0, 0), OpId(1, 0)
    [(s1, r1)] = step(spec, s, "pop", op=a, conc=ALWAYS)
    assert r1 == 3
    outs = step(spec, s1, "pop", op=b, conc=ALWAYS)
    assert (((), (3, (a, b))), 3) in outs
    assert (((), None), EPS) in outs


@pytest.mark.parametrize("m", [1, 2])
def test_stuttering_queue_counters(m):
    spec = stuttering_queue_spec(m)
    s0 = spec.initial_state
    outs = step(spec, s0, "enq", 4)
    # effective insert plus one stutter while the counter is below m
    assert ((4,), 0, 0) in {s for s, _ in outs}
    assert ((), 1, 0) in {s for s, _ in outs}
    assert all(r == OK for _, r in outs)
    # drive the enq counter to the cap: no further stutter branch
    capped = ((), m, 0)
    outs = step(spec, capped, "enq", 4)
    assert {s for s, _ in outs} == {((4,), 0, 0)}
    # removals report the front even when they stutter
    full = ((8, 9), 0, 0)
    outs = step(spec, full, "deq")
    assert set(outs) == {(((9,), 0, 0), 8), (((8, 9), 0, 1), 8)}
    # empty removal keeps state, answers the sentinel, resets the counter
    assert step(spec, ((), 0, m), "deq") == [(((), 0, 0), EMPTY)]
    assert not spec.valid_state(((), m + 1, 0))


def test_stuttering_stack_counters():
    spec = stuttering_stack_spec(1)
    outs = step(spec, ((7,), 0, 0), "pop")
    assert set(outs) == {(((), 0, 0), 7), (((7,), 0, 1), 7)}
    # a stuttered pop leaves the top in place for the next one
    outs2 = step(spec, ((7,), 0, 1), "pop")
    assert set(outs2) == {(((), 0, 0), 7)}
    assert step(spec, ((), 1, 1), "pop") == [(((), 1, 0), EPS)]


def test_out_of_order_queue_window():
    spec = out_of_order_queue_spec(2)
    assert not spec.deterministic
    s = (1, 2, 3)
    outs = step(spec, s, "deq")
    assert set(outs) == {((2, 3), 1), ((1, 3), 2)}
    assert step(spec, (9,), "deq") == [((), 9)]
    assert step(spec, (), "deq") == [((), EMPTY)]
    assert out_of_order_queue_spec(1).deterministic


def test_relaxed_bounds_validated():
    with pytest.raises(ConfigurationError):
        stuttering_queue_spec(0)
    with pytest.raises(ConfigurationError):
        stuttering_stack_spec(-1)
    with pytest.raises(ConfigurationError):
        out_of_order_queue_spec(0)


# ---------------------------------------------------------------------------
# registry and op spaces


def test_registry_is_complete():
    assert len(SPEC_FACTORIES) == 15
    for kind, factory in SPEC_FACTORIES.items():
        if kind == "snapshot":
            spec = factory(3)
        elif kind in ("stuttering_queue", "stuttering_stack"):
            spec = factory(2)
        elif kind == "out_of_order_queue":
            spec = factory(2)
        else:
            spec = factory()
        assert spec.valid_state(spec.initial_state), kind
        assert spec.op_space is not None, kind
        for name, args in spec.op_space(2):
            assert isinstance(name, str) and isinstance(args, tuple)


def test_make_spec():
    assert make_spec("queue").name == "queue"
    assert make_spec("stuttering_queue", m=2).name == "stuttering_queue(m=2)"
    with pytest.raises(ConfigurationError):
        make_spec("deque")


@given(st.lists(st.sampled_from(["enq0", "enq1", "deq"]), max_size=8))
def test_out_of_order_contains_fifo_behaviour(ops):
    """Every strict-FIFO run is also admitted by the k=2 relaxation."""
    fifo, relaxed = queue_spec(), out_of_order_queue_spec(2)
    s_f = fifo.initial_state
    frontier = {relaxed.initial_state}
    for o in ops:
        name, args = ("enq", (int(o[-1]),)) if o.startswith("enq") else ("deq", ())
        s_f, resp = fifo.apply(s_f, name, args)
        frontier = {s2 for s in frontier
                    for s2, r in relaxed.apply_all(s, name, args) if r == resp}
        assert frontier, (name, resp)
    assert s_f in frontier
