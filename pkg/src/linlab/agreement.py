"""Set agreement from strongly-linearizable containers.

An ordering profile packages, for each process, a proposal sequence of
container insertions, a decision sequence of removals, and a decision
function mapping the responses a process saw to the index of a winner.
The agreement protocol runs the proposal sequences against a shared
implementation, announcing progress in a timestamp array so that a
double collect can grab a consistent snapshot of the implementation's
base objects; each process then replays its decision sequence privately
on the snapshot and reads the winner's proposal.

The point of the exercise: with an atomic (or otherwise strongly
linearizable) container the decided set is small, while merely
linearizable implementations can leak extra decisions. `sweep_agreement`
enumerates every bounded schedule of the protocol, `verify_collect_claim`
audits the snapshot argument on recorded runs, and `check_k_ordering`
brute-forces the sequential property the profiles promise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .errors import CapacityError, ConfigurationError, HarnessError
from .model import BOT, OK
from .objects import (QUEUE, RELAXED_QUEUE, RELAXED_STACK, REGISTER, STACK,
                      ObjectSpec, apply_action)
from .programs import LOCK_FREE, WAIT_FREE, Program
from .scheduler import Crash, OpContext, Simulation, Trace, Workload
from . import checker as _checker
from . import specs as _specs

PROFILE_TAGS = ("queue", "stack", "multiplicityQueue", "multiplicityStack",
                "stutteringQueue", "stutteringStack", "outOfOrderQueue")


# ---------------------------------------------------------------------------
# ordering profiles


def _d_last_index(n: int) -> Callable:
    """Winner = the process index in the final response; 0 if there is none."""
    def d(i: int, resps: tuple) -> int:
        if resps:
            v = resps[-1]
            if isinstance(v, int) and 0 <= v < n:
                return v
        return 0
    return d


def _d_deepest(n: int) -> Callable:
    """Winner = the process index popped last (largest subindex, skipping
    empty responses); 0 if no response names a process."""
    def d(i: int, resps: tuple) -> int:
        for v in reversed(resps):
            if isinstance(v, int) and 0 <= v < n:
                return v
        return 0
    return d


@dataclass(frozen=True)
class OrderingProfile:
    """Per-process proposal/decision sequences plus the decision map.

    `d` is total: on response sequences that no legal execution produces it
    falls back to process 0, and property checks never feed it such inputs.
    `loose_winner` marks profiles (the stuttering ones) whose winner only
    promises an effective insertion, not a completed proposal sequence.
    """

    tag: str
    n: int
    k: int
    prop: tuple                      # per process: tuple of (name, args)
    dec: tuple                       # per process: tuple of (name, args)
    d: Callable = field(compare=False)
    object_spec: ObjectSpec = field(compare=False)
    spec_factory: Callable = field(compare=False)
    loose_winner: bool = False
    m: Optional[int] = None
    ooo_k: Optional[int] = None

    def seq_spec(self) -> _specs.SequentialSpec:
        return self.spec_factory()

    def describe(self) -> dict:
        return {"object": self.tag, "n": self.n, "k": self.k,
                "prop": [[list(iv) for iv in seq] for seq in self.prop],
                "dec": [[list(iv) for iv in seq] for seq in self.dec],
                "m": self.m, "outOfOrderBound": self.ooo_k}


def profile_for(obj: str, n: int, m: Optional[int] = None,
                k: Optional[int] = None) -> OrderingProfile:
    """Build the ordering profile for one of the container variants."""
    if n < 2:
        raise ConfigurationError("agreement needs at least 2 processes")

    enq1 = tuple(((("enq", (i,)),)) for i in range(n))
    push1 = tuple(((("push", (i,)),)) for i in range(n))
    one_deq = tuple((("deq", ()),) for _ in range(n))

    if obj == "queue":
        return OrderingProfile(
            "queue", n, 1, enq1, one_deq, _d_last_index(n),
            ObjectSpec(QUEUE), _specs.queue_spec)

    if obj == "stack":
        pops = tuple(tuple(("pop", ()) for _ in range(n + 1)) for _ in range(n))
        return OrderingProfile(
            "stack", n, 1, push1, pops, _d_deepest(n),
            ObjectSpec(STACK), _specs.stack_spec)

    if obj == "multiplicityQueue":
        return OrderingProfile(
            "multiplicityQueue", n, 1, enq1, one_deq, _d_last_index(n),
            ObjectSpec(RELAXED_QUEUE, params=(("mode", "multiplicity"),)),
            _specs.multiplicity_queue_spec)

    if obj == "multiplicityStack":
        pops = tuple(tuple(("pop", ()) for _ in range(n + 1)) for _ in range(n))
        return OrderingProfile(
            "multiplicityStack", n, 1, push1, pops, _d_deepest(n),
            ObjectSpec(RELAXED_STACK, params=(("mode", "multiplicity"),)),
            _specs.multiplicity_stack_spec)

    if obj == "stutteringQueue":
        if m is None or m < 1:
            raise ConfigurationError("stutteringQueue needs a bound m >= 1")
        prop = tuple(tuple(("enq", (i,)) for _ in range(m + 1)) for i in range(n))
        return OrderingProfile(
            "stutteringQueue", n, 1, prop, one_deq, _d_last_index(n),
            ObjectSpec(RELAXED_QUEUE, params=(("m", m), ("mode", "stuttering"))),
            lambda: _specs.stuttering_queue_spec(m), loose_winner=True, m=m)

    if obj == "stutteringStack":
        if m is None or m < 1:
            raise ConfigurationError("stutteringStack needs a bound m >= 1")
        prop = tuple(tuple(("push", (i,)) for _ in range(m + 1)) for i in range(n))
        pops = tuple(tuple(("pop", ()) for _ in range(n * (m + 1) + 1))
                     for _ in range(n))
        return OrderingProfile(
            "stutteringStack", n, 1, prop, pops, _d_deepest(n),
            ObjectSpec(RELAXED_STACK, params=(("m", m), ("mode", "stuttering"))),
            lambda: _specs.stuttering_stack_spec(m), loose_winner=True, m=m)

    if obj == "outOfOrderQueue":
        if k is None or not 1 <= k <= n - 1:
            raise ConfigurationError(
                f"outOfOrderQueue needs 1 <= k <= n-1, got {k!r}")
        return OrderingProfile(
            "outOfOrderQueue", n, k, enq1, one_deq, _d_last_index(n),
            ObjectSpec(RELAXED_QUEUE, params=(("k", k), ("mode", "outOfOrder"))),
            lambda: _specs.out_of_order_queue_spec(k), ooo_k=k)

    raise ConfigurationError(
        f"unknown ordering object {obj!r}; expected one of {PROFILE_TAGS}")


# ---------------------------------------------------------------------------
# targets: every op of the container as a single shared step


def _one_step_op(action_name: str):
    def op(prog, proc, op_id, args, ctx):
        resp = yield (("O",), (action_name,) + tuple(args))
        return resp
    return op


def atomic_object_program(profile: OrderingProfile) -> Program:
    """Wrap the profile's container as a program whose every operation is one
    atomic step, the trivially strongly-linearizable target."""
    names = {nm for seq in profile.prop + profile.dec for nm, _ in seq}
    ops = {nm: _one_step_op(nm) for nm in sorted(names)}
    return Program(
        f"atomic[{profile.tag}]", profile.n,
        profile.seq_spec(),
        ({("O",): profile.object_spec}, {}),
        ops, WAIT_FREE,
        f"every {profile.tag} operation as one atomic step",
        "a single atomic container",
        catalog=False,
        params={"values": profile.n, "atomicTarget": True},
        budgets=lambda prog, name, w: 1)


def _impl_keys(impl: Program) -> tuple:
    static, arrays = impl.layout
    if arrays:
        raise ConfigurationError(
            f"{impl.name} uses growable arrays; the collect phase needs a "
            "statically known base-object set")
    return tuple(sorted(static))


# ---------------------------------------------------------------------------
# the protocol program


def _replica_spec(spec: ObjectSpec) -> ObjectSpec:
    params = dict(spec.params)
    params["solo"] = 1
    return ObjectSpec(spec.kind, spec.init, tuple(sorted(params.items())))


def _local_decide(impl: Program, proc: int, states: dict, dec: tuple,
                  committed: dict) -> list:
    """Run the decision sequence on a private copy of collected states."""
    static, _ = impl.layout
    resps = []
    states = dict(states)
    for name, iargs in dec:
        ctx = OpContext(committed)
        gen = impl.start(proc, None, name, tuple(iargs), ctx)
        try:
            item = next(gen)
            while True:
                key, action = item
                spec = static[key]
                options = apply_action(spec.kind, states[key], action, proc,
                                       dict(spec.params))
                if len(options) != 1:
                    raise HarnessError(
                        f"private replay of {name} branched {len(options)} "
                        f"ways at {key}; decision replay must be deterministic")
                states[key], resp, _tag = options[0]
                item = gen.send(resp)
        except StopIteration as stop:
            resps.append(stop.value)
        committed.update(ctx._pending)
    return resps


def algorithm_b_program(impl: Program, profile: OrderingProfile,
                        inputs: tuple) -> Program:
    """The collect-based agreement protocol over `impl`, one `agree` op per
    process: announce the input, run the proposal sequence with a timestamp
    write before every implementation step, double-collect until quiet, replay
    the decision sequence on the snapshot, read the winner's proposal."""
    n = profile.n
    if impl.n != n:
        raise ConfigurationError(
            f"implementation is for {impl.n} processes, profile for {n}")
    if len(inputs) != n:
        raise ConfigurationError(f"need {n} inputs, got {len(inputs)}")
    r_keys = _impl_keys(impl)
    for key in r_keys:
        if key[0] in ("M", "T", "D"):
            raise ConfigurationError(
                f"implementation key {key!r} collides with the protocol's "
                "proposal/timestamp/replica arrays")
    atomic = bool(impl.params.get("atomicTarget"))

    static = dict(impl.layout[0])
    for i in range(n):
        static[("M", i)] = ObjectSpec(REGISTER, init=BOT)
        static[("T", i)] = ObjectSpec(REGISTER, init=0)
        if atomic:
            static[("D", i)] = _replica_spec(profile.object_spec)

    def agree(prog, proc, op_id, args, ctx):
        yield (("M", proc), ("write", args[0]))
        resps = []
        t = 0
        committed: dict = {}
        for name, iargs in profile.prop[proc]:
            sub = OpContext(committed)
            gen = impl.start(proc, op_id, name, tuple(iargs), sub)
            try:
                item = next(gen)
                while True:
                    t += 1
                    yield (("T", proc), ("write", t))
                    r = yield item
                    item = gen.send(r)
            except StopIteration as stop:
                resps.append(stop.value)
            committed.update(sub._pending)
        while True:
            t1 = []
            for j in range(n):
                t1.append((yield (("T", j), ("read",))))
            r_states = []
            for key in r_keys:
                r_states.append((yield (key, ("read",))))
            t2 = []
            for j in range(n):
                t2.append((yield (("T", j), ("read",))))
            if t1 == t2:
                break
        if atomic:
            yield (("D", proc), ("load", r_states[0]))
            dec_resps = []
            for name, iargs in profile.dec[proc]:
                dec_resps.append((yield (("D", proc), (name,) + tuple(iargs))))
        else:
            dec_resps = _local_decide(impl, proc, dict(zip(r_keys, r_states)),
                                      profile.dec[proc], committed)
        winner = profile.d(proc, tuple(resps) + tuple(dec_resps))
        value = yield (("M", winner), ("read",))
        if value is BOT:
            raise HarnessError(
                f"process {proc} decided index {winner} but no proposal is "
                "in place, which a converged double collect rules out")
        ctx.set("winner", winner)
        ctx.set("decision", value)
        return value

    def budgets(prog, name, workload):
        per_prop = _prop_step_bounds(impl, profile)
        if any(b is None for b in per_prop):
            return None
        worst = 0
        for i in range(n):
            loops = 1 + sum(per_prop[j] for j in range(n) if j != i)
            steps = 1 + 2 * per_prop[i] + loops * (2 * n + len(r_keys)) + 1
            if atomic:
                steps += 1 + len(profile.dec[i])
            worst = max(worst, steps)
        return worst

    prog = Program(
        f"agreement[{profile.tag}/{impl.name}]", n,
        impl.spec,
        (static, dict(impl.layout[1])),
        {"agree": agree}, LOCK_FREE,
        f"collect-based agreement protocol over {impl.name}",
        "the target's base objects plus proposal and timestamp registers",
        catalog=False,
        params={"values": max([n] + [v for v in inputs if isinstance(v, int)])},
        budgets=budgets)
    if atomic:
        # atomic targets take one step per proposal, so the tape parses
        # positionally and dead collect iterations can be folded out of
        # the run-graph key
        prog.config_key = _make_fold(
            n, len(r_keys),
            [1 + 2 * len(profile.prop[i]) for i in range(n)],
            [1 + len(profile.dec[i]) for i in range(n)])
    return prog


def _digest_tape(tape: tuple, head_len: int, n: int, r_len: int,
                 tail_len: int) -> tuple:
    """Drop response-tape regions that no longer influence the operation.

    Failed double-collect iterations are discarded by the protocol the moment
    the timestamps disagree; once the converged snapshot has been handed to
    the decision replica (visible as an entry past the quiet block) the
    block's contents are dead too; and with every decision response recorded
    the winner index lives in the pending read, making the whole tape dead.
    Two runs differing only in such regions behave identically from here on,
    so the graph may merge them."""
    if len(tape) <= head_len:
        return tuple(tape)
    head, rest = tuple(tape[:head_len]), tuple(tape[head_len:])
    width = 2 * n + r_len
    i = 0
    conv = None
    while i + width <= len(rest):
        block = rest[i:i + width]
        i += width
        if block[:n] == block[n + r_len:]:
            conv = block
            break
    if conv is None:
        return head + rest[i:]          # mid-collect: keep the live partial block
    after = rest[i:]
    if len(after) >= tail_len:
        return ("#",)                   # only the final proposal read remains
    if after:
        return head + ("#",) + after    # snapshot committed downstream
    return head + conv


def _make_fold(n: int, r_len: int, head_lens: list, tail_lens: list) -> Callable:
    def fold(config):
        table, procs = config
        folded = tuple(
            entry[:3] + (_digest_tape(entry[3], head_lens[p], n, r_len,
                                      tail_lens[p]),)
            + entry[4:]
            for p, entry in enumerate(procs))
        return (table, folded)
    return fold


def _prop_step_bounds(impl: Program, profile: OrderingProfile) -> list:
    """Per process, an upper bound on shared steps its proposals take."""
    out = []
    for i in range(profile.n):
        w = Workload(impl.n, tuple(
            tuple(profile.prop[j]) if j == i else ()
            for j in range(impl.n)))
        total = 0
        for name, _args in profile.prop[i]:
            b = impl.step_budget(name, w)
            if b is None:
                out.append(None)
                break
            total += b
        else:
            out.append(total)
    return out


def agreement_workload(profile: OrderingProfile, inputs: tuple) -> Workload:
    return Workload(profile.n, tuple((("agree", (x,)),) for x in inputs))


# ---------------------------------------------------------------------------
# runs


@dataclass
class AgreementRun:
    """One recorded protocol execution plus the pieces validators need."""

    tag: str
    inputs: tuple
    decisions: tuple            # per process, BOT when it never decided
    winners: tuple              # per process, decided index or None
    crashed: tuple              # process ids that crashed
    converged: tuple            # process ids whose double-collect loop exited
    inconclusive: tuple         # live processes the schedule starved
    proposals: tuple            # final M states
    timestamps: tuple           # final T states
    r_keys: tuple               # base objects the collect reads
    collects: dict              # proc -> {"e1", "e2", "r"} of the last collect
    trace: Trace
    profile_args: tuple         # (tag, n, m, k) to rebuild the profile
    atomic_target: bool = True

    def json(self) -> dict:
        return {
            "schemaVersion": 1,
            "object": self.tag,
            "n": len(self.inputs),
            "inputs": list(self.inputs),
            "decisions": [None if d is BOT else d for d in self.decisions],
            "winners": list(self.winners),
            "crashed": list(self.crashed),
            "converged": list(self.converged),
            "inconclusive": list(self.inconclusive),
            "proposals": [None if v is BOT else v for v in self.proposals],
            "timestamps": list(self.timestamps),
            "rKeys": [list(k) for k in self.r_keys],
            "collects": {str(p): {"e1": c["e1"], "e2": c["e2"],
                                  "r": [[list(k), repr(v)] for k, v in c["r"]]}
                         for p, c in self.collects.items()},
        }


def _parse_run(sim: Simulation, profile: OrderingProfile, r_keys: tuple,
               inputs: tuple, atomic: bool) -> AgreementRun:
    n = profile.n
    trace = sim.trace()
    decisions, winners = [], []
    for rt in sim.procs:
        decisions.append(rt.local.get("decision", BOT))
        winners.append(rt.local.get("winner"))
    crashed = tuple(p for p in range(n) if sim.procs[p].crashed)

    collects: dict = {}
    converged = []
    width = 2 * n + len(r_keys)
    for p in range(n):
        own = [s for s in trace.steps if s.proc == p]
        idx = 0
        while idx < len(own) and not (own[idx].key[0] == "T"
                                      and own[idx].action[0] == "read"):
            idx += 1
        last = None
        while idx + width <= len(own):
            block = own[idx:idx + width]
            t1 = [s.response for s in block[:n]]
            rblk = block[n:n + len(r_keys)]
            t2 = [s.response for s in block[n + len(r_keys):]]
            quiet = t1 == t2
            last = (block[n - 1].index, block[n + len(r_keys)].index,
                    tuple((s.key, s.response) for s in rblk), quiet)
            idx += width
            if quiet:
                break
        if last and last[3]:
            converged.append(p)
            collects[p] = {"e1": last[0], "e2": last[1], "r": last[2]}

    inconclusive = tuple(
        p for p in range(n)
        if not sim.procs[p].crashed and sim.procs[p].work_remaining())

    return AgreementRun(
        tag=profile.tag, inputs=tuple(inputs),
        decisions=tuple(decisions), winners=tuple(winners),
        crashed=crashed, converged=tuple(converged),
        inconclusive=inconclusive,
        proposals=tuple(sim.table.get(("M", i)).state for i in range(n)),
        timestamps=tuple(sim.table.get(("T", i)).state for i in range(n)),
        r_keys=r_keys, collects=collects, trace=trace,
        profile_args=(profile.tag, profile.n, profile.m, profile.ooo_k),
        atomic_target=atomic)


def run_algorithm_b(impl: Optional[Program], profile: OrderingProfile,
                    inputs: tuple, schedule: Optional[Iterable] = None,
                    choices: Iterable = ()) -> AgreementRun:
    """Run the protocol once. `impl=None` targets the atomic container. With
    no schedule, processes run round-robin to completion (first branch taken
    at every nondeterministic step); an explicit schedule may starve the loop,
    which shows up as an inconclusive process, not an error."""
    if impl is None:
        impl = atomic_object_program(profile)
    bprog = algorithm_b_program(impl, profile, tuple(inputs))
    workload = agreement_workload(profile, tuple(inputs))
    sim = Simulation(bprog.layout, bprog.start, workload, choices)
    if schedule is None:
        guard = 0
        cap = 10_000 * profile.n
        while not sim.finished():
            for p in sim.eligible():
                fanout = sim.prepare(p)
                sim.commit(p, 0 if fanout > 1 else None)
                guard += 1
                if guard > cap:
                    raise CapacityError(
                        f"protocol run passed {cap} steps without finishing")
    else:
        sim.run(schedule)
    return _parse_run(sim, profile, _impl_keys(impl), tuple(inputs),
                      bool(impl.params.get("atomicTarget")))


# ---------------------------------------------------------------------------
# validators


def validate_agreement(runs: Iterable[AgreementRun], k: int) -> dict:
    """Check Validity, k-Agreement and the termination surrogate on each run."""
    report = {"schemaVersion": 1, "k": k, "runs": 0, "ok": True,
              "failures": [], "inconclusiveRuns": 0}
    for idx, run in enumerate(runs):
        report["runs"] += 1
        problems = []
        decided = [d for d in run.decisions if d is not BOT]
        stray = [d for d in decided if d not in run.inputs]
        if stray:
            problems.append(f"validity: decisions {stray} are no process input")
        if len(set(decided)) > k:
            problems.append(
                f"agreement: {len(set(decided))} distinct decisions "
                f"{sorted(set(decided))}, bound is {k}")
        if run.inconclusive:
            report["inconclusiveRuns"] += 1
        for p in range(len(run.inputs)):
            if p in run.crashed or p in run.inconclusive:
                continue
            if run.decisions[p] is BOT:
                problems.append(f"termination: process {p} finished without deciding")
        if problems:
            report["failures"].append(
                {"run": idx, "object": run.tag, "inputs": list(run.inputs),
                 "decisions": [None if d is BOT else d for d in run.decisions],
                 "problems": problems})
    report["ok"] = not report["failures"]
    return report


def check_step_discipline(run: AgreementRun) -> list:
    """Every implementation step in the proposal phase must directly follow
    that process's own timestamp write, and after the collect loop starts a
    process may only read the implementation's objects; the snapshot argument
    leans on both orderings."""
    r_keys = set(run.r_keys)
    violations = []
    prev_by_proc: dict = {}
    in_loop: set = set()
    for s in run.trace.steps:
        if s.key[0] == "T" and s.action[0] == "read":
            in_loop.add(s.proc)
        if s.key in r_keys:
            if s.proc in in_loop:
                if s.action[0] != "read":
                    violations.append(
                        f"step {s.index}: process {s.proc} mutated {s.key} "
                        "after entering its collect loop")
            else:
                before = prev_by_proc.get(s.proc)
                if not (before is not None and before.key == ("T", s.proc)
                        and before.action[0] == "write"):
                    violations.append(
                        f"step {s.index}: process {s.proc} touched {s.key} "
                        "without announcing a timestamp first")
        prev_by_proc[s.proc] = s
    return violations


def verify_collect_claim(run: AgreementRun,
                         impl: Optional[Program] = None) -> bool:
    """Audit the snapshot argument: for each converged process, rebuild the
    recorded run with interfering steps past that process's collect window
    removed and its snapshot reads moved to the end of the window; the states
    those reads return must match what the process collected. A hand-edited
    (forged) run fails the comparison."""
    tag, n, m, ooo_k = run.profile_args
    profile = profile_for(tag, n, m=m, k=ooo_k)
    if impl is None:
        if not run.atomic_target:
            raise ConfigurationError(
                "run targeted a non-atomic implementation; pass it explicitly")
        impl = atomic_object_program(profile)
    bprog = algorithm_b_program(impl, profile, run.inputs)
    workload = agreement_workload(profile, run.inputs)
    trace = run.trace
    steps = trace.steps

    for p in run.converged:
        info = run.collects.get(p)
        if info is None:
            return False
        e1, e2 = info["e1"], info["e2"]
        recorded = list(info["r"])
        if [k for k, _v in recorded] != list(run.r_keys):
            return False

        own_read_at = {}
        for s in steps[e1 + 1:e2]:
            if s.proc == p:
                own_read_at[s.key] = s.index
        first_loop = {}
        for s in steps:
            if (s.proc != p and s.key[0] == "T" and s.action[0] == "read"
                    and s.proc not in first_loop):
                first_loop[s.proc] = s.index

        cutoff = {}
        for q in range(n):
            if q == p:
                continue
            cands = [e2]
            if q in first_loop:
                cands.append(first_loop[q])
            moved = [s.index for s in steps[e1 + 1:e2]
                     if s.proc == q and s.key in own_read_at
                     and s.index > own_read_at[s.key]]
            if moved:
                cands.append(min(moved))
            cutoff[q] = min(cands)

        schedule, tickets = [], []
        step_iter = iter(steps)
        for item in trace.schedule:
            if isinstance(item, Crash):
                continue                      # absent steps subsume the crash
            s = next(step_iter)
            q = s.proc
            keep = s.index <= e1 if q == p else s.index < cutoff[q]
            if keep:
                schedule.append(q)
                if s.choice is not None:
                    tickets.append(s.choice)
        schedule.extend([p] * len(run.r_keys))

        sim = Simulation(bprog.layout, bprog.start, workload, tickets)
        try:
            sim.run(schedule)
        except Exception:
            return False
        replayed = [s for s in sim.steps if s.proc == p][-len(run.r_keys):]
        got = [(s.key, s.response) for s in replayed]
        if got != recorded:
            return False
    return True


# ---------------------------------------------------------------------------
# exhaustive sweep over bounded schedules


@dataclass
class AgreementVerdict:
    ok: bool
    k: int
    terminal_classes: int
    nodes: int
    decision_profiles: tuple      # sorted distinct decision tuples
    distinct_decisions: int       # max over classes of |non-crashed decisions|
    failures: tuple = ()
    collects_checked: int = 0
    collects_ok: bool = True

    def json(self) -> dict:
        return {"ok": self.ok, "k": self.k,
                "terminalClasses": self.terminal_classes,
                "nodes": self.nodes,
                "decisionProfiles": [list(pr) for pr in self.decision_profiles],
                "distinctDecisions": self.distinct_decisions,
                "failures": list(self.failures),
                "collectsChecked": self.collects_checked,
                "collectsOk": self.collects_ok}


def _terminal_summary(key) -> tuple:
    """Pull (decision tuple, crashed tuple) out of a run-graph node key."""
    per_proc = key[0][1]
    decisions, crashed = [], []
    for p, entry in enumerate(per_proc):
        local = dict(entry[5])
        decisions.append(local.get("decision", BOT))
        if entry[1]:
            crashed.append(p)
    return tuple(decisions), tuple(crashed)


def _paths_to_terminals(graph) -> dict:
    """One label path per terminal class, via a parent tree over the node DAG."""
    parent = {graph.root_key: None}
    order = [graph.root_key]
    qi = 0
    while qi < len(order):
        key = order[qi]
        qi += 1
        for _events, child, label in graph.nodes[key]:
            if child not in parent:
                parent[child] = (key, label)
                order.append(child)
    paths = {}
    for key, edges in graph.nodes.items():
        if edges:
            continue
        labels = []
        cur = key
        while parent[cur] is not None:
            prev, label = parent[cur]
            labels.append(label)
            cur = prev
        paths[key] = tuple(reversed(labels))
    return paths


def sweep_agreement(profile: OrderingProfile, inputs: tuple,
                    impl: Optional[Program] = None,
                    crash_budget: Optional[int] = None,
                    node_limit: int = 400_000,
                    collect_limit: Optional[int] = None) -> AgreementVerdict:
    """Enumerate every schedule class of the protocol at the given crash
    budget (default n-1, keeping one correct process), validate each terminal
    class, and audit the snapshot argument on one representative run per
    class (capped at `collect_limit`)."""
    if impl is None:
        impl = atomic_object_program(profile)
    n = profile.n
    if crash_budget is None:
        crash_budget = n - 1
    bprog = algorithm_b_program(impl, profile, tuple(inputs))
    workload = agreement_workload(profile, tuple(inputs))
    bounds = _checker.Bounds(crash_budget=crash_budget, node_limit=node_limit)
    graph = _checker.RunGraph(bprog, workload, bounds, lean=True)

    failures: list = []
    profiles = set()
    worst = 0
    terminals = []
    for key, edges in graph.nodes.items():
        if edges:
            continue
        terminals.append(key)
        decisions, crashed = _terminal_summary(key)
        profiles.add(decisions)
        decided = [d for p, d in enumerate(decisions) if d is not BOT]
        distinct = set(decided)
        worst = max(worst, len(distinct))
        problems = []
        stray = [d for d in decided if d not in inputs]
        if stray:
            problems.append(f"validity: {stray} not among the inputs")
        if len(distinct) > profile.k:
            problems.append(
                f"agreement: {sorted(distinct)} exceeds the bound {profile.k}")
        for p in range(n):
            if p not in crashed and decisions[p] is BOT:
                problems.append(f"termination: process {p} never decided")
        if problems:
            failures.append({"decisions": [None if d is BOT else d
                                           for d in decisions],
                             "crashed": list(crashed),
                             "problems": problems})

    checked = 0
    collects_ok = True
    paths = _paths_to_terminals(graph)
    seen_profiles = set()
    for key in terminals:
        decisions, _crashed = _terminal_summary(key)
        fresh = decisions not in seen_profiles
        seen_profiles.add(decisions)
        if not fresh and collect_limit is not None and checked >= collect_limit:
            continue
        sim = graph.rerun(paths[key])
        run = _parse_run(sim, profile, _impl_keys(impl), tuple(inputs),
                         bool(impl.params.get("atomicTarget")))
        checked += 1
        if not verify_collect_claim(run, impl):
            collects_ok = False
            failures.append({"decisions": [None if d is BOT else d
                                           for d in decisions],
                             "problems": ["collect audit: the recorded snapshot "
                                          "is not reachable by the sanctioned "
                                          "reordering"]})

    ok = not failures and collects_ok
    return AgreementVerdict(
        ok=ok, k=profile.k, terminal_classes=len(terminals),
        nodes=len(graph.nodes),
        decision_profiles=tuple(sorted(
            (tuple(None if d is BOT else d for d in pr) for pr in profiles),
            key=repr)),
        distinct_decisions=worst,
        failures=tuple(failures[:8]),
        collects_checked=checked, collects_ok=collects_ok)


# ---------------------------------------------------------------------------
# the sequential ordering property itself


@dataclass
class ConformanceReport:
    tag: str
    n: int
    k: int
    ok: bool
    alphas: int                  # prefix classes satisfying the hypothesis
    nodes: int
    max_outcomes: int
    violations: tuple = ()

    def json(self) -> dict:
        return {"object": self.tag, "n": self.n, "k": self.k, "ok": self.ok,
                "alphas": self.alphas, "nodes": self.nodes,
                "maxOutcomes": self.max_outcomes,
                "violations": list(self.violations)}


def check_k_ordering(profile: OrderingProfile,
                     max_nodes: int = 500_000) -> ConformanceReport:
    """Brute-force the ordering property over sequential executions.

    A sequential execution here is a path through the container's transition
    system: it carries the internal resolution of nondeterministic steps
    (which insertions took effect, not just what they answered), and two
    paths with the same visible responses but different resolutions are
    different executions with possibly different winner sets. For every
    resolved prefix in which some process completed its whole proposal
    sequence, the decisions reachable in any extension (over every resolution
    of the decision sequence too) must fit in k indexes, and each decided
    index must have completed its proposals; the stuttering variants only
    promise the winner invoked something."""
    spec = profile.seq_spec()
    n = profile.n

    dec_cache: dict = {}

    def dec_resp_sets(state, dec: tuple) -> set:
        cached = dec_cache.get((state, dec))
        if cached is not None:
            return cached
        frontier = {(): {state}}
        for name, args in dec:
            nxt: dict = {}
            for resps, ss in frontier.items():
                for s in ss:
                    for s2, r in spec.apply_all(s, name, tuple(args)):
                        nxt.setdefault(resps + (r,), set()).add(spec.freeze(s2))
            frontier = nxt
        out = set(frontier)
        dec_cache[(state, dec)] = out
        return out

    root = (tuple(0 for _ in range(n)), spec.freeze(spec.initial_state))
    memo: dict = {}
    violations: list = []

    def prop_resps(count: int) -> tuple:
        # container insertions answer OK, so responses follow from the count
        return (OK,) * count

    def walk(node) -> frozenset:
        if node in memo:
            return memo[node]
        if len(memo) >= max_nodes:
            raise CapacityError(
                f"sequential enumeration exceeds {max_nodes} distinct nodes")
        positions, state = node
        outcomes = set()
        for i in range(n):
            if positions[i] != len(profile.prop[i]):
                continue
            for resps in dec_resp_sets(state, profile.dec[i]):
                ell = profile.d(i, prop_resps(positions[i]) + resps)
                outcomes.add(ell)
                done = (positions[ell] >= 1 if profile.loose_winner
                        else positions[ell] == len(profile.prop[ell]))
                if not done and len(violations) < 8:
                    what = ("has inserted nothing" if profile.loose_winner
                            else "has not completed its proposals")
                    violations.append(
                        f"winner {ell} decided via process {i} responses "
                        f"{resps} at proposal positions {positions}, but "
                        f"{ell} {what}")
        for x in range(n):
            if positions[x] >= len(profile.prop[x]):
                continue
            name, args = profile.prop[x][positions[x]]
            pos2 = positions[:x] + (positions[x] + 1,) + positions[x + 1:]
            for s2, _r in spec.apply_all(state, name, tuple(args)):
                outcomes |= walk((pos2, spec.freeze(s2)))
        memo[node] = frozenset(outcomes)
        return memo[node]

    walk(root)

    alphas = 0
    max_outcomes = 0
    for (positions, _state), outcomes in memo.items():
        if not any(positions[j] == len(profile.prop[j]) for j in range(n)):
            continue
        alphas += 1
        max_outcomes = max(max_outcomes, len(outcomes))
        if len(outcomes) > profile.k and len(violations) < 8:
            violations.append(
                f"at proposal positions {positions} the reachable decisions "
                f"{sorted(outcomes)} need {len(outcomes)} indexes, bound is "
                f"{profile.k}")

    return ConformanceReport(
        tag=profile.tag, n=n, k=profile.k, ok=not violations,
        alphas=alphas, nodes=len(memo), max_outcomes=max_outcomes,
        violations=tuple(violations))
