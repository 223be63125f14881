"""Systematic step-level mutants as regression armor.

The catalog algorithms are sensitive to the exact order and content of their
shared steps. Each mutant rewrites one step of one operation: swapping two
adjacent steps, dropping a step (a read probe takes its slot so schedules
stay comparable, and the operation carries on with the response the dropped
step would have produced against the probed state), or zeroing a fetch-add
delta. The suite reruns the bounded checkers per mutant and reports which
mutants flip a verdict relative to the unmutated baseline; a healthy
algorithm plus checker pair kills the step-order mutants and never flags the
identity mutant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .errors import ConfigurationError
from .model import OK
from .programs import Program
from .scheduler import Simulation, Workload
from . import checker as _checker

MECHANISMS = ("identity", "swap", "drop", "zeroDelta")

# actions whose response is a constant OK, independent of object state
_CONST_OK = {"write", "write_max", "update", "load"}
# actions whose would-be response equals the object's current state
_STATE_VALUED = {"fetch_add", "test_and_set", "swap", "read", "read_max",
                 "scan"}


def _droppable(action: tuple) -> bool:
    return action[0] in _CONST_OK or action[0] in _STATE_VALUED


def _drop_response(action: tuple, probed):
    if action[0] in _CONST_OK:
        return OK
    return probed


def _swappable_first(action: tuple) -> bool:
    # the first step of a swapped pair answers before it runs, so its
    # response must be predictable: constant, or equal to the current state
    return action[0] in _CONST_OK or action[0] in _STATE_VALUED


@dataclass(frozen=True)
class Mutant:
    mechanism: str
    op: str
    index: int          # step index within the operation, -1 for identity

    @property
    def name(self) -> str:
        if self.mechanism == "identity":
            return "identity"
        return f"{self.mechanism}@{self.op}:{self.index}"


def _wrap(fn: Callable, mutant: Mutant, fired: list) -> Callable:
    mech, target = mutant.mechanism, mutant.index

    def mutated(prog, proc, op_id, args, ctx):
        gen = fn(prog, proc, op_id, args, ctx)
        idx = 0
        try:
            item = next(gen)
            while True:
                key, action = item
                if idx == target and mech == "zeroDelta" \
                        and action[0] == "fetch_add" and action[1] != 0:
                    fired[0] = True
                    resp = yield (key, ("fetch_add", 0))
                elif idx == target and mech == "drop" and _droppable(action):
                    fired[0] = True
                    probed = yield (key, ("read",))
                    resp = _drop_response(action, probed)
                elif idx == target and mech == "swap" \
                        and _swappable_first(action):
                    fired[0] = True
                    if action[0] in _CONST_OK:
                        early = OK
                    else:
                        early = yield (key, ("read",))
                    try:
                        item2 = gen.send(early)
                    except StopIteration as stop:
                        # nothing to swap with after all: run the held step
                        yield item
                        return stop.value
                    resp2 = yield item2       # the later step goes first
                    yield item                # the held step lands late
                    idx += 2
                    item = gen.send(resp2)
                    continue
                else:
                    resp = yield item
                idx += 1
                item = gen.send(resp)
        except StopIteration as stop:
            return stop.value

    return mutated


def mutated_program(prog: Program, mutant: Mutant) -> tuple:
    """Clone the program with one operation rewritten; returns the clone and
    a one-cell `fired` list that turns true once the mutation actually runs."""
    fired = [False]
    if mutant.mechanism == "identity":
        return prog, fired
    if mutant.op not in prog.ops:
        raise ConfigurationError(f"{prog.name} has no operation {mutant.op!r}")
    ops = dict(prog.ops)
    ops[mutant.op] = _wrap(prog.ops[mutant.op], mutant, fired)
    clone = Program(
        f"{prog.name}[{mutant.name}]", prog.n, prog.spec, prog.layout, ops,
        prog.progress, f"{prog.description} (mutant {mutant.name})",
        prog.base_objects, catalog=False, params=dict(prog.params),
        budgets=None, point_rule=None, validate=prog._validate,
        invariant=prog.invariant,
        strongly_linearizable=prog.strongly_linearizable)
    return clone, fired


def _probe_steps(prog: Program, name: str, args: tuple) -> list:
    """Solo-run one operation and record its step actions."""
    seqs = tuple((((name, args),) if p == 0 else ()) for p in range(prog.n))
    sim = Simulation(prog.layout, prog.start, Workload(prog.n, seqs))
    guard = 0
    while sim.work_remaining(0):
        fanout = sim.prepare(0)
        sim.commit(0, 0 if fanout > 1 else None)
        guard += 1
        if guard > 10_000:
            raise ConfigurationError(
                f"solo probe of {name} did not finish within 10000 steps")
    return [s.action for s in sim.steps]


def mutants_for(prog: Program, workload: Workload,
                mechanisms: Iterable[str] = ("swap", "drop", "zeroDelta"),
                max_index: int = 8) -> list:
    """Enumerate applicable mutants, probing each operation's solo step
    sequence to skip mechanism/step combinations that could never fire."""
    for mech in mechanisms:
        if mech not in MECHANISMS:
            raise ConfigurationError(f"unknown mutation mechanism {mech!r}")
    first_args: dict = {}
    for seq in workload.per_proc:
        for name, args in seq:
            first_args.setdefault(name, args)
    out = [Mutant("identity", "", -1)]
    for name in sorted(first_args):
        actions = _probe_steps(prog, name, first_args[name])
        for idx, action in enumerate(actions[:max_index]):
            if "zeroDelta" in mechanisms and action[0] == "fetch_add" \
                    and action[1] != 0:
                out.append(Mutant("zeroDelta", name, idx))
            if "drop" in mechanisms and _droppable(action):
                out.append(Mutant("drop", name, idx))
            if "swap" in mechanisms and idx + 1 < len(actions) \
                    and _swappable_first(action):
                out.append(Mutant("swap", name, idx))
    return out


# ---------------------------------------------------------------------------
# the suite


@dataclass
class MutantResult:
    mutant: Mutant
    fired: bool
    verdicts: dict                 # property -> bool
    killed_by: tuple = ()
    error: Optional[str] = None

    @property
    def killed(self) -> bool:
        return bool(self.killed_by)

    def json(self) -> dict:
        return {"name": self.mutant.name, "mechanism": self.mutant.mechanism,
                "op": self.mutant.op, "index": self.mutant.index,
                "fired": self.fired, "verdicts": dict(self.verdicts),
                "killed": self.killed, "killedBy": list(self.killed_by),
                "error": self.error}


@dataclass
class MutationReport:
    program: str
    baseline: dict
    results: tuple
    killed: int
    survived: int
    never_fired: int
    identity_clean: bool

    def json(self) -> dict:
        return {"schemaVersion": 1, "program": self.program,
                "baseline": dict(self.baseline),
                "mutants": [r.json() for r in self.results],
                "killed": self.killed, "survived": self.survived,
                "neverFired": self.never_fired,
                "identityClean": self.identity_clean}


def _verdicts(prog: Program, workload: Workload,
              bounds: _checker.Bounds) -> dict:
    out = {}
    out["linearizable"] = _checker.sweep_linearizable(prog, workload, bounds).ok
    out["stronglyLinearizable"] = _checker.check_strong(prog, workload, bounds).ok
    if prog.invariant is not None:
        out["invariant"] = _checker.sweep_invariants(prog, workload, bounds).ok
    return out


def run_mutation_suite(prog: Program, workload: Workload,
                       bounds: Optional[_checker.Bounds] = None,
                       mutants: Optional[list] = None,
                       workers: int = 1) -> MutationReport:
    """Measure the unmutated baseline, then rerun the checkers per mutant.

    A mutant is killed when any property verdict differs from the baseline
    (so a program whose baseline already fails a property is compared against
    that honest baseline, not against its claims). Mutants whose rewrite
    never executed are reported separately instead of counting as survivors.
    """
    if bounds is None:
        bounds = _checker.Bounds()
    if mutants is None:
        mutants = mutants_for(prog, workload)
    baseline = _verdicts(prog, workload, bounds)

    def examine(mut: Mutant) -> MutantResult:
        clone, fired = mutated_program(prog, mut)
        try:
            verdicts = _verdicts(clone, workload, bounds)
        except Exception as exc:   # a mutant may break stepping outright
            return MutantResult(mut, fired[0], {},
                                killed_by=("error",), error=str(exc))
        flips = tuple(sorted(k for k, v in verdicts.items()
                             if baseline.get(k) != v))
        return MutantResult(mut, fired[0], verdicts, killed_by=flips)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(examine, mutants))
    else:
        results = [examine(m) for m in mutants]

    killed = sum(1 for r in results
                 if r.mutant.mechanism != "identity" and r.killed)
    never = sum(1 for r in results
                if r.mutant.mechanism != "identity" and not r.fired
                and not r.killed)
    survived = sum(1 for r in results
                   if r.mutant.mechanism != "identity" and r.fired
                   and not r.killed)
    identity = next((r for r in results
                     if r.mutant.mechanism == "identity"), None)
    identity_clean = identity is not None and not identity.killed
    return MutationReport(
        program=prog.name, baseline=baseline, results=tuple(results),
        killed=killed, survived=survived, never_fired=never,
        identity_clean=identity_clean)
