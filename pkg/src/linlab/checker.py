"""Linearizability checking, per history and over whole bounded run trees.

Three levels:

* `check_history` decides one recorded history against a sequential spec,
  tracking a frontier of (spec state, promised responses) candidates and
  linearizing pending operations lazily at response events.
* `sweep_linearizable` decides every history a program can produce within
  bounds. Runs are folded into a graph whose nodes merge run prefixes with
  identical full configurations, then the frontier is propagated over that
  graph, so equal futures are checked once.
* `check_strong` decides whether one prefix-stable linearization function
  exists for the whole run tree: a recursion over (node, candidate) pairs
  demands that a single committed candidate survive every extension. The
  no-verdict comes with a conflict witness, a reachable prefix plus two
  extensions whose surviving candidate sets are disjoint.

Naive brute-force twins (`brute_history`, `brute_strong`) re-decide tiny
instances from first principles and exist to cross-check the real checkers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional

from .errors import CapacityError, ConfigurationError, PointRuleError
from .model import (INVOKE, RESPOND, History, LinEntry, OpId, _freeze, args_of)
from .scheduler import Crash, Simulation, Trace, Workload, schedule_json

_ANY_CONC = lambda a, b: True


@dataclass(frozen=True)
class Bounds:
    """Capacity limits for the bounded checkers."""

    crash_budget: int = 1
    max_ops: int = 8          # single-history candidate tracking is exponential
    node_limit: int = 400_000
    state_limit: int = 2_000_000

    def json(self):
        return {"crashBudget": self.crash_budget, "maxOps": self.max_ops,
                "nodeLimit": self.node_limit, "stateLimit": self.state_limit}


# ---------------------------------------------------------------------------
# frontier machinery
#
# A candidate is (frozen spec state, promises) where promises is a frozenset
# of (op, frozen response) for operations already linearized but still
# pending. Completed operations are implicit: their promises were consumed.


def _saturate(cands: dict, avail: dict, spec, conc) -> dict:
    """Close candidates under linearizing available pending operations now."""
    seen = dict(cands)
    work = list(cands.items())
    while work:
        (state, promises), lin = work.pop()
        owned = {o for o, _ in promises}
        for o, (nm, ag) in avail.items():
            if o in owned:
                continue
            for s2, resp in spec.apply_all(spec.thaw(state), nm, ag, o, conc):
                key = (spec.freeze(s2), promises | frozenset([(o, _freeze(resp))]))
                if key not in seen:
                    entry = lin + (LinEntry(o, nm, ag, resp),)
                    seen[key] = entry
                    work.append((key, entry))
    return seen


def _consume(sat: dict, op: OpId, resp) -> dict:
    victim = (op, _freeze(resp))
    out = {}
    for (state, promises), lin in sat.items():
        if victim in promises:
            out.setdefault((state, promises - frozenset([victim])), lin)
    return out


@dataclass
class HistoryVerdict:
    ok: bool
    witness: Optional[tuple] = None          # linearization as LinEntry tuple
    violating_prefix: Optional[int] = None   # event count of the shortest bad prefix
    explored: int = 0

    def json(self):
        d = {"ok": self.ok, "explored": self.explored}
        if self.witness is not None:
            d["witness"] = [e.json() for e in self.witness]
        if self.violating_prefix is not None:
            d["violatingPrefix"] = self.violating_prefix
        return d


def check_history(h: History, spec, bound: int = 8) -> HistoryVerdict:
    """Decide linearizability of one history; on failure the reported prefix
    length is minimal because prefixes of linearizable histories stay
    linearizable."""
    ops = h.invoked_ops()
    if len(ops) > bound:
        raise CapacityError(
            f"history has {len(ops)} operations, bound is {bound}")
    conc = h.overlaps
    cands = {(spec.freeze(spec.initial_state), frozenset()): ()}
    avail: dict = {}
    explored = 1
    for idx, ev in enumerate(h):
        if ev.kind == INVOKE:
            avail[ev.op] = (ev.name, args_of(h, ev.op))
            continue
        sat = _saturate(cands, avail, spec, conc)
        explored += len(sat)
        cands = _consume(sat, ev.op, ev.payload)
        avail.pop(ev.op, None)
        if not cands:
            return HistoryVerdict(False, None, idx + 1, explored)
    witness = min(cands.values(), key=lambda lin: tuple(e.key() for e in lin))
    return HistoryVerdict(True, witness, None, explored)


def brute_history(h: History, spec) -> bool:
    """Reference decision by raw search over orders and response choices.
    Exponential; for cross-checks on small histories only."""
    ops = list(h.invoked_ops())
    complete = set(h.complete_ops())
    conc = h.overlaps

    def rec(placed: frozenset, state) -> bool:
        if complete <= placed:
            return True
        for op in ops:
            if op in placed:
                continue
            if any(c not in placed and h.precedes(c, op) for c in ops):
                continue
            nm = h.invocation(op).name
            ag = args_of(h, op)
            rec_rsp = h.response(op)
            for s2, resp in spec.apply_all(state, nm, ag, op, conc):
                if rec_rsp is not None and _freeze(resp) != _freeze(rec_rsp.payload):
                    continue
                if rec(placed | {op}, s2):
                    return True
        return False

    return rec(frozenset(), spec.initial_state)


# ---------------------------------------------------------------------------
# run graph: the bounded run tree folded by full configuration


class RunGraph:
    """Nodes are (configuration, remaining crash budget); edges carry the
    events they emit. Two run prefixes reaching the same node have identical
    futures, so tree-wide checks can work on the graph instead."""

    def __init__(self, prog, workload: Workload, bounds: Bounds,
                 lean: bool = False):
        """Lean graphs skip the per-edge event payloads, the pending-op
        table, and the forked histories; linearization sweeps need those,
        reachability-style sweeps do not."""
        prog.validate_workload(workload)
        self.prog = prog
        self.workload = workload
        self.bounds = bounds
        self.nodes: dict = {}     # key -> tuple of (events, child key, label)
        self.avail: dict = {}     # key -> {op: (name, args)} for invoked pending ops
        self.terminals = 0
        # a program may fold configurations further (dropping parts of the
        # response tape that cannot influence future behavior); the hook must
        # keep the (table, per-proc entries) shape
        fold = getattr(prog, "config_key", None) or (lambda c: c)
        intern: dict = {}         # one stored instance per distinct key
        root = Simulation(prog.layout, prog.start, workload)
        self.root_key = (fold(root.config()), bounds.crash_budget)
        intern[self.root_key] = self.root_key
        pending = {self.root_key: root}
        stack = [self.root_key]
        while stack:
            key = stack.pop()
            if key in self.nodes:
                continue
            sim = pending.pop(key)
            if len(self.nodes) >= bounds.node_limit:
                raise CapacityError(
                    f"run graph exceeds {bounds.node_limit} nodes "
                    f"({self.terminals} complete classes so far)")
            if not lean:
                self.avail[key] = {rt.op_id: (rt.op_name, rt.op_args)
                                   for rt in sim.procs if rt.op_id is not None}
            budget = key[1]
            edges = []

            def reach(child, label):
                ck = (fold(child.config()),
                      budget - 1 if label[0] == "crash" else budget)
                ck = intern.setdefault(ck, ck)
                evs = None if lean else tuple(child.events[base:])
                edges.append((evs, ck, label))
                if ck not in self.nodes and ck not in pending:
                    pending[ck] = child
                    stack.append(ck)

            for p in sim.eligible():
                base = len(sim.events)
                if budget > 0:
                    child = sim.fork(light=lean)
                    child.crash(p)
                    reach(child, ("crash", p))
                child = sim.fork(light=lean)
                fanout = child.prepare(p)
                if fanout <= 1:
                    child.commit(p)
                    reach(child, ("step", p, None))
                else:
                    for pick in range(fanout):
                        grand = child.fork(light=lean)
                        grand.commit(p, pick)
                        reach(grand, ("step", p, pick))
            if not edges:
                self.terminals += 1
            self.nodes[key] = tuple(edges)

    def schedule_of(self, labels: Iterable[tuple]):
        """Turn a path of edge labels back into (schedule, ticket stream)."""
        sched, choices = [], []
        for label in labels:
            if label[0] == "crash":
                sched.append(Crash(label[1]))
            else:
                sched.append(label[1])
                if label[2] is not None:
                    choices.append(label[2])
        return tuple(sched), tuple(choices)

    def rerun(self, labels: Iterable[tuple]) -> Simulation:
        sched, choices = self.schedule_of(labels)
        sim = Simulation(self.prog.layout, self.prog.start, self.workload, choices)
        sim.run(sched)
        return sim


def _advance_set(frontier: frozenset, events, avail: dict, spec) -> frozenset:
    """Push a set of candidates across the events of one edge (no witnesses)."""
    if not events:
        return frontier
    avail = dict(avail)
    cur = set(frontier)
    for ev in events:
        if ev.kind == INVOKE:
            avail[ev.op] = (ev.name, () if ev.payload is None else ev.payload)
            continue
        cands = {ls: () for ls in cur}
        sat = _saturate(cands, avail, spec, _ANY_CONC)
        victim = (ev.op, _freeze(ev.payload))
        cur = {(st, pr - frozenset([victim])) for (st, pr) in sat if victim in pr}
        avail.pop(ev.op, None)
        if not cur:
            return frozenset()
    return frozenset(cur)


def _initial_candidate(spec):
    return (spec.freeze(spec.initial_state), frozenset())


# ---------------------------------------------------------------------------
# linearizability of every bounded history


@dataclass
class SweepVerdict:
    ok: bool
    nodes: int
    product_states: int
    terminals: int
    violation: Optional[dict] = None

    def json(self):
        d = {"ok": self.ok, "nodes": self.nodes,
             "productStates": self.product_states, "terminals": self.terminals}
        if self.violation is not None:
            d["violation"] = self.violation
        return d


def sweep_linearizable(prog, workload: Workload, bounds: Bounds = Bounds()) -> SweepVerdict:
    """Check that every run within bounds has a linearizable history."""
    total = sum(len(s) for s in workload.per_proc)
    if total > bounds.max_ops:
        raise CapacityError(
            f"workload has {total} operations, bound is {bounds.max_ops}")
    graph = RunGraph(prog, workload, bounds)
    spec = prog.spec
    fr0 = frozenset([_initial_candidate(spec)])
    seen = set()
    stack = [(graph.root_key, fr0, ())]
    while stack:
        key, fr, path = stack.pop()
        pk = (key, fr)
        if pk in seen:
            continue
        seen.add(pk)
        if len(seen) > bounds.state_limit:
            raise CapacityError(
                f"linearizability sweep exceeds {bounds.state_limit} states")
        for events, ck, label in graph.nodes[key]:
            fr2 = _advance_set(fr, events, graph.avail[key], spec)
            if not fr2:
                sim = graph.rerun(path + (label,))
                verdict = check_history(sim.history(), spec, bounds.max_ops)
                return SweepVerdict(False, len(graph.nodes), len(seen),
                                    graph.terminals,
                                    {"trace": sim.trace().json(),
                                     "violatingPrefix": verdict.violating_prefix})
            stack.append((ck, fr2, path + (label,)))
    return SweepVerdict(True, len(graph.nodes), len(seen), graph.terminals)


# ---------------------------------------------------------------------------
# prefix-stable linearizability over the whole run tree


@dataclass
class StrongVerdict:
    ok: bool
    nodes: int
    states: int
    terminals: int
    elapsed: float
    witness: Optional[dict] = None

    def json(self):
        d = {"ok": self.ok, "nodes": self.nodes, "states": self.states,
             "terminals": self.terminals, "elapsed": round(self.elapsed, 3)}
        if self.witness is not None:
            d["witness"] = self.witness
        return d


def _candidate_json(cand) -> dict:
    state, promises = cand
    return {"specState": _jsonish(state),
            "promised": sorted(([o.proc, o.seq, _jsonish(r)] for o, r in promises))}


def _jsonish(v):
    if isinstance(v, (tuple, frozenset)):
        return [_jsonish(x) for x in (sorted(v, key=repr) if isinstance(v, frozenset) else v)]
    if isinstance(v, OpId):
        return [v.proc, v.seq]
    return v


def check_strong(prog, workload: Workload, bounds: Bounds = Bounds()) -> StrongVerdict:
    """Does one prefix-stable linearization function cover the run tree?

    A candidate committed at a node must, for every outgoing edge, admit an
    extension that stays good in the child. The recursion is memoized on
    (node, candidate); the graph is finite and acyclic, so it terminates.
    """
    t0 = time.time()
    total = sum(len(s) for s in workload.per_proc)
    if total > bounds.max_ops:
        raise CapacityError(
            f"workload has {total} operations, bound is {bounds.max_ops}")
    graph = RunGraph(prog, workload, bounds)
    spec = prog.spec
    memo: dict = {}

    def good(key, cand) -> bool:
        mk = (key, cand)
        hit = memo.get(mk)
        if hit is not None:
            return hit
        if len(memo) > bounds.state_limit:
            raise CapacityError(
                f"candidate table exceeds {bounds.state_limit} states "
                f"({len(graph.nodes)} graph nodes)")
        res = True
        for events, ck, label in graph.nodes[key]:
            outs = _advance_set(frozenset([cand]), events, graph.avail[key], spec)
            if not any(good(ck, o) for o in sorted(outs, key=repr)):
                res = False
                break
        memo[mk] = res
        return res

    ok = good(graph.root_key, _initial_candidate(spec))
    witness = None
    if not ok:
        witness = _find_conflict(graph, spec, good)
    return StrongVerdict(ok, len(graph.nodes), len(memo), graph.terminals,
                         time.time() - t0, witness)


def _find_conflict(graph: RunGraph, spec, good) -> Optional[dict]:
    """Locate a reachable prefix with two extensions whose surviving
    candidate sets are disjoint: no single committed choice covers both."""
    fr0 = frozenset([_initial_candidate(spec)])
    seen = set()
    stack = [(graph.root_key, fr0, ())]
    fallback = None
    while stack:
        key, fr, path = stack.pop()
        pk = (key, fr)
        if pk in seen:
            continue
        seen.add(pk)
        edges = graph.nodes[key]
        if len(edges) >= 2:
            surv = []
            for events, ck, label in edges:
                alive = frozenset(
                    s for s in fr
                    if any(good(ck, o)
                           for o in _advance_set(frozenset([s]), events,
                                                 graph.avail[key], spec)))
                surv.append((alive, label))
            for i in range(len(surv)):
                for j in range(i + 1, len(surv)):
                    ai, aj = surv[i][0], surv[j][0]
                    if ai and aj and not (ai & aj):
                        sched, choices = graph.schedule_of(path)
                        sim = graph.rerun(path)
                        return {
                            "kind": "conflict",
                            "schedule": schedule_json(sched),
                            "choices": list(choices),
                            "history": sim.history().json(),
                            "extensionA": list(surv[i][1]),
                            "extensionB": list(surv[j][1]),
                            "survivorsA": [_candidate_json(c) for c in sorted(ai, key=repr)],
                            "survivorsB": [_candidate_json(c) for c in sorted(aj, key=repr)],
                        }
        for events, ck, label in edges:
            fr2 = _advance_set(fr, events, graph.avail[key], spec)
            if not fr2 and fallback is None:
                sched, choices = graph.schedule_of(path + (label,))
                fallback = {"kind": "unlinearizable",
                            "schedule": schedule_json(sched), "choices": list(choices)}
                continue
            if fr2:
                stack.append((ck, fr2, path + (label,)))
    return fallback


def brute_strong(prog, workload: Workload, crash_budget: int = 0) -> bool:
    """Reference prefix-stable check on the raw run tree with explicit
    linearization sequences. Exponential twice over; tiny inputs only."""
    spec = prog.spec

    def all_lins(h: History):
        complete = set(h.complete_ops())
        ops = list(h.invoked_ops())
        conc = h.overlaps
        out = []

        def rec(placed, state, seq):
            if complete <= {e.op for e in seq}:
                out.append(tuple(seq))
            for op in ops:
                if op in placed:
                    continue
                if any(c not in placed and h.precedes(c, op) for c in ops):
                    continue
                nm = h.invocation(op).name
                ag = args_of(h, op)
                rec_rsp = h.response(op)
                for s2, resp in spec.apply_all(state, nm, ag, op, conc):
                    if rec_rsp is not None and _freeze(resp) != _freeze(rec_rsp.payload):
                        continue
                    rec(placed | {op}, s2, seq + [LinEntry(op, nm, ag, resp)])

        rec(frozenset(), spec.initial_state, [])
        return out

    def key_of(lin):
        return tuple(e.key() for e in lin)

    def children(sim, budget):
        out = []
        for p in sim.eligible():
            if budget > 0:
                c = sim.fork()
                c.crash(p)
                out.append((c, budget - 1))
            c = sim.fork()
            fanout = c.prepare(p)
            if fanout <= 1:
                c.commit(p)
                out.append((c, budget))
            else:
                for pick in range(fanout):
                    g = c.fork()
                    g.commit(p, pick)
                    out.append((g, budget))
        return out

    def ngood(sim, lam, budget) -> bool:
        kids = children(sim, budget)
        if not kids:
            return True
        for child, b2 in kids:
            lam_key = key_of(lam)
            exts = [l2 for l2 in all_lins(child.history())
                    if key_of(l2)[:len(lam)] == lam_key]
            if not any(ngood(child, l2, b2) for l2 in exts):
                return False
        return True

    root = Simulation(prog.layout, prog.start, workload)
    return ngood(root, (), crash_budget)


# ---------------------------------------------------------------------------
# step-point rules


@dataclass
class PointVerdict:
    ok: bool
    reason: Optional[str] = None

    def json(self):
        return {"ok": self.ok, "reason": self.reason}


def step_point_check(prog, trace: Trace, rule: Optional[Callable] = None) -> PointVerdict:
    """Validate a rule mapping operations to linearization steps of a trace.

    The rule returns (op, step index, rank) triples; order is by (index,
    rank). Structural defects of the rule itself (double points, pointless
    complete operations, points outside the operation's window) raise
    PointRuleError; a semantic mismatch just fails the check.
    """
    rule = rule or prog.point_rule
    if rule is None:
        raise ConfigurationError(f"{prog.name} publishes no step-point rule")
    h = trace.history
    by_op = {}
    for op, idx, rank in rule(trace):
        if op in by_op:
            raise PointRuleError(f"rule assigns two points to {op}")
        if not 0 <= idx < len(trace.steps):
            raise PointRuleError(f"rule points {op} at missing step {idx}")
        by_op[op] = (idx, rank)
    complete = set(h.complete_ops())
    missing = complete - set(by_op)
    if missing:
        raise PointRuleError(
            "complete operations without a point: "
            + ", ".join(sorted(map(str, missing))))
    window: dict = {}
    for s in trace.steps:
        lo, _ = window.get(s.op, (s.index, s.index))
        window[s.op] = (lo, s.index)
    for op, (idx, _) in by_op.items():
        if op not in window:
            raise PointRuleError(f"{op} took no step but got point {idx}")
        lo, hi = window[op]
        if idx < lo or (op in complete and idx > hi):
            raise PointRuleError(
                f"point {idx} of {op} leaves its window [{lo}, {hi}]")
    order = sorted(by_op.items(),
                   key=lambda kv: (kv[1][0], kv[1][1], kv[0].proc, kv[0].seq))
    spec = prog.spec
    conc = h.overlaps
    states = {spec.freeze(spec.initial_state)}
    for op, _ in order:
        nm = h.invocation(op).name
        ag = args_of(h, op)
        rec_rsp = h.response(op)
        nxt = set()
        for fs in states:
            for s2, resp in spec.apply_all(spec.thaw(fs), nm, ag, op, conc):
                if rec_rsp is not None and _freeze(resp) != _freeze(rec_rsp.payload):
                    continue
                nxt.add(spec.freeze(s2))
        if not nxt:
            return PointVerdict(
                False, f"replaying the points mismatches at {op} ({nm})")
        states = nxt
    return PointVerdict(True)


@dataclass
class PointSweep:
    ok: bool
    traces: int
    failure: Optional[dict] = None

    def json(self):
        d = {"ok": self.ok, "traces": self.traces}
        if self.failure is not None:
            d["failure"] = self.failure
        return d


def sweep_step_points(prog, workload: Workload, bounds: Bounds = Bounds(),
                      rule: Optional[Callable] = None) -> PointSweep:
    """Run the step-point rule over every distinct bounded run."""
    from .scheduler import enumerate_runs
    prog.validate_workload(workload)
    count = 0
    for sim in enumerate_runs(
            lambda: Simulation(prog.layout, prog.start, workload),
            crash_budget=bounds.crash_budget):
        count += 1
        if count > bounds.state_limit:
            raise CapacityError(f"more than {bounds.state_limit} traces")
        trace = sim.trace()
        verdict = step_point_check(prog, trace, rule)
        if not verdict.ok:
            return PointSweep(False, count,
                              {"trace": trace.json(), "reason": verdict.reason})
    return PointSweep(True, count)


# ---------------------------------------------------------------------------
# per-program structural invariants over whole traces


@dataclass
class InvariantSweep:
    ok: bool
    traces: int
    violations: tuple = ()

    def json(self):
        return {"ok": self.ok, "traces": self.traces,
                "violations": list(self.violations)}


def sweep_invariants(prog, workload: Workload, bounds: Bounds = Bounds()) -> InvariantSweep:
    """Check the program's own trace invariant on every distinct bounded run."""
    from .scheduler import enumerate_runs
    if prog.invariant is None:
        raise ConfigurationError(f"{prog.name} declares no trace invariant")
    prog.validate_workload(workload)
    count = 0
    bad: list = []
    for sim in enumerate_runs(
            lambda: Simulation(prog.layout, prog.start, workload),
            crash_budget=bounds.crash_budget):
        count += 1
        if count > bounds.state_limit:
            raise CapacityError(f"more than {bounds.state_limit} traces")
        found = prog.invariant(sim.trace())
        if found:
            bad.append({"schedule": [it.json() if hasattr(it, "json") else it
                                     for it in sim.schedule_log],
                        "violations": found})
            if len(bad) >= 5:
                break
    return InvariantSweep(not bad, count, tuple(bad))


# ---------------------------------------------------------------------------
# progress: published step budgets and completion


@dataclass
class LivenessVerdict:
    ok: bool
    nodes: int
    max_steps: dict
    failure: Optional[str] = None

    def json(self):
        return {"ok": self.ok, "nodes": self.nodes,
                "maxSteps": dict(self.max_steps), "failure": self.failure}


def sweep_budgets(prog, workload: Workload, bounds: Bounds = Bounds()) -> LivenessVerdict:
    """Confirm operations finish, and wait-free ones within their budgets.

    Works on the folded run graph: an operation's step count is its response
    tape length, and the response edge adds one final step.
    """
    graph = RunGraph(prog, workload, bounds)
    max_steps: dict = {}
    failure = None

    def note(name: str, steps: int) -> Optional[str]:
        if steps > max_steps.get(name, 0):
            max_steps[name] = steps
        budget = prog.step_budget(name, workload)
        if prog.progress == "waitFree" and budget is not None and steps > budget:
            return f"{name} took {steps} steps, budget {budget}"
        return None

    for key, edges in graph.nodes.items():
        config, budget = key
        per_proc = config[1]
        for proc, entry in enumerate(per_proc):
            next_op, crashed, op_id, tape, pending, local = entry
            if op_id is not None and not crashed:
                name = workload.per_proc[proc][op_id.seq][0]
                failure = failure or note(name, len(tape))
        for events, ck, label in edges:
            for ev in events:
                if ev.kind == RESPOND:
                    tape = per_proc[ev.op.proc][3]
                    failure = failure or note(ev.name, len(tape) + 1)
        if not edges:
            for proc, entry in enumerate(per_proc):
                next_op, crashed, op_id, tape, pending, local = entry
                if not crashed and next_op < len(workload.per_proc[proc]):
                    failure = failure or f"process {proc} stalled at op {next_op}"
    return LivenessVerdict(failure is None, len(graph.nodes), max_steps, failure)
