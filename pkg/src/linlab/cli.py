"""Command-line front end: reproducible checking suites with JSON reports.

Exit codes: 0 every checked property holds, 1 some property failed, 2 the
bounded search ran out of capacity (or the requested bounds exceed the
documented envelope and --force was not given), 64 bad usage or
configuration.  Reports carry schemaVersion 1 and embed the effective
configuration; a config file supplies defaults, flags win on conflict.
"""

import argparse
import inspect
import json
import os
import sys

from .agreement import (PROFILE_TAGS, check_k_ordering, check_step_discipline,
                        profile_for, run_algorithm_b, sweep_agreement,
                        validate_agreement, verify_collect_claim)
from .checker import Bounds, check_strong, sweep_linearizable
from .errors import (CapacityError, ConfigurationError, LinlabError,
                     UnknownOperationError)
from .mutate import MECHANISMS, mutants_for, run_mutation_suite
from .programs import CATALOG, PROGRAMS, default_workload, make_program
from .scheduler import Simulation, Workload, schedule_from_json

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CAPACITY = 2
EXIT_USAGE = 64

# the desk-scale envelope the bounded checkers are sized for
LIMITS = {"n": 4, "ops": 3, "total_ops": 8, "values": 4, "crash_budget": 2,
          "agreement_n": 3, "m": 2}


class _Parser(argparse.ArgumentParser):
    """argparse, but usage problems exit with the documented code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# config plumbing


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold an object")
    return data


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults, then config-file values, then explicit flags."""
    cfg = dict(defaults)
    given = {k: v for k, v in vars(args).items() if v is not None}
    file_cfg = {}
    if given.get("config"):
        file_cfg = _load_config_file(given.pop("config"))
    for key, value in file_cfg.items():
        if key not in defaults:
            raise ConfigurationError(f"config file key {key!r} is not a "
                                     f"setting of this command")
        cfg[key] = value
    for key, value in given.items():
        if key in cfg:
            cfg[key] = value
    return cfg


def _gate(problems: list, force: bool):
    if problems and not force:
        print("requested bounds exceed the documented envelope "
              "(pass --force to try anyway):", file=sys.stderr)
        for p in problems:
            print(f"  {p}", file=sys.stderr)
        raise SystemExit(EXIT_CAPACITY)


_summary_stream = sys.stdout


def _say(text: str):
    print(text, file=_summary_stream)


def _emit_report(report: dict, path):
    if path == "-":
        json.dump(report, sys.stdout, indent=2)
        sys.stdout.write("\n")
    elif path:
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2)
        _say(f"report written to {path}")


def _yesno(ok: bool) -> str:
    return "yes" if ok else "no"


# ---------------------------------------------------------------------------
# building blocks shared by check and mutate


def _build_program(cfg: dict):
    name = cfg.get("program")
    if not name:
        raise ConfigurationError("no program given (use --program)")
    extra = {}
    if cfg.get("values") is not None:
        extra["values"] = int(cfg["values"])
    for item in cfg.get("param") or ():
        if "=" not in item:
            raise ConfigurationError(f"--param wants key=value, got {item!r}")
        key, _, raw = item.partition("=")
        if raw in ("true", "false"):
            extra[key] = raw == "true"
        else:
            try:
                extra[key] = int(raw)
            except ValueError:
                extra[key] = raw
    factory = PROGRAMS.get(name)
    if factory is not None:
        allowed = set(inspect.signature(factory).parameters)
        stray = set(extra) - allowed
        if stray:
            raise ConfigurationError(
                f"{name} does not take parameter(s) {sorted(stray)}")
        extra = {k: v for k, v in extra.items() if k in allowed}
    return make_program(name, int(cfg["n"]), **extra)


_NEGWITNESS = Workload(3, ((("inc", ()),),
                           (("inc", ()), ("inc", ())),
                           (("read", ()),)))


def _build_workload(prog, cfg: dict) -> Workload:
    which = cfg.get("workload", "default")
    if which == "negwitness":
        if prog.n != 3:
            raise ConfigurationError("the negwitness workload is for n=3")
        prog.validate_workload(_NEGWITNESS)
        return _NEGWITNESS
    if which == "default":
        return default_workload(prog, ops=int(cfg["ops"]))
    raise ConfigurationError(f"unknown workload {which!r}")


def _bounds(cfg: dict, total_ops: int) -> Bounds:
    return Bounds(crash_budget=int(cfg["crash_budget"]),
                  max_ops=max(8, total_ops) if cfg["force"] else 8,
                  node_limit=int(cfg["node_limit"]),
                  state_limit=int(cfg["state_limit"]))


def _check_gate(cfg: dict, workload: Workload):
    total = sum(len(s) for s in workload.per_proc)
    problems = []
    if int(cfg["n"]) > LIMITS["n"]:
        problems.append(f"n={cfg['n']} > {LIMITS['n']}")
    if int(cfg["ops"]) > LIMITS["ops"]:
        problems.append(f"ops/process={cfg['ops']} > {LIMITS['ops']}")
    if total > LIMITS["total_ops"]:
        problems.append(f"total operations {total} > {LIMITS['total_ops']} "
                        f"(the candidate tracker is exponential in this)")
    if cfg.get("values") and int(cfg["values"]) > LIMITS["values"]:
        problems.append(f"values={cfg['values']} > {LIMITS['values']}")
    if int(cfg["crash_budget"]) > LIMITS["crash_budget"]:
        problems.append(f"crash budget {cfg['crash_budget']} > "
                        f"{LIMITS['crash_budget']}")
    _gate(problems, cfg["force"])


def _run_to_completion(prog, workload: Workload):
    """Round-robin run taking the first branch everywhere; returns the
    finished simulation and the ticket stream that reproduces it."""
    sim = Simulation(prog.layout, prog.start, workload)
    picks = []
    guard, cap = 0, 100_000
    while not sim.finished():
        for p in sim.eligible():
            fanout = sim.prepare(p)
            if fanout > 1:
                sim.commit(p, 0)
                picks.append(0)
            else:
                sim.commit(p)
            guard += 1
            if guard > cap:
                raise CapacityError(f"run passed {cap} steps unfinished")
    return sim, picks


# ---------------------------------------------------------------------------
# check


def cmd_check(cfg: dict) -> int:
    prog = _build_program(cfg)
    workload = _build_workload(prog, cfg)
    _check_gate(cfg, workload)
    total = sum(len(s) for s in workload.per_proc)
    bounds = _bounds(cfg, total)

    lin = sweep_linearizable(prog, workload, bounds)
    strong = check_strong(prog, workload, bounds)
    claims = prog.claims()
    mismatches = []
    if lin.ok != claims["linearizable"]:
        mismatches.append({"property": "linearizable",
                           "claimed": claims["linearizable"], "found": lin.ok})
    if strong.ok != claims["stronglyLinearizable"]:
        mismatches.append({"property": "stronglyLinearizable",
                           "claimed": claims["stronglyLinearizable"],
                           "found": strong.ok})
    passed = lin.ok and strong.ok

    _say(f"program {prog.name} (n={prog.n}, {total} operations, "
          f"crash budget {bounds.crash_budget})")
    _say(f"  linearizable:          {_yesno(lin.ok)}  "
          f"({lin.nodes} nodes, {lin.product_states} frontier states)")
    _say(f"  strongly linearizable: {_yesno(strong.ok)}  "
          f"({strong.states} candidates, {strong.elapsed:.2f}s)")
    if mismatches:
        for m in mismatches:
            _say(f"  claim mismatch: {m['property']} claimed "
                  f"{_yesno(m['claimed'])}, found {_yesno(m['found'])}")
    else:
        _say("  claims match")

    report = {"schemaVersion": 1, "command": "check", "config": cfg,
              "claims": claims,
              "linearizable": lin.json(),
              "stronglyLinearizable": strong.json(),
              "claimMismatches": mismatches, "pass": passed}
    _emit_report(report, cfg.get("report"))

    if cfg.get("emit_trace"):
        _emit_trace(prog, workload, cfg, strong)
    return EXIT_PASS if passed else EXIT_FAIL


def _emit_trace(prog, workload, cfg, strong):
    """Write a replayable artifact: the strong-linearizability witness
    schedule when there is one, a plain completed run otherwise."""
    if strong.witness and strong.witness.get("schedule") is not None:
        schedule = schedule_from_json(strong.witness["schedule"])
        picks = list(strong.witness.get("choices", ()))
        sim = Simulation(prog.layout, prog.start, workload, tuple(picks))
        sim.run(schedule)
    else:
        sim, picks = _run_to_completion(prog, workload)
    artifact = {"schemaVersion": 1, "kind": "trace",
                "program": prog.name, "n": prog.n,
                "params": {k: v for k, v in prog.params.items()
                           if isinstance(v, (int, str, bool))},
                "workload": workload.json(),
                "choices": picks,
                "trace": sim.trace().json()}
    with open(cfg["emit_trace"], "w") as fh:
        json.dump(artifact, fh, indent=2)
    _say(f"trace written to {cfg['emit_trace']}")


# ---------------------------------------------------------------------------
# mutate


def cmd_mutate(cfg: dict) -> int:
    prog = _build_program(cfg)
    workload = _build_workload(prog, cfg)
    _check_gate(cfg, workload)
    total = sum(len(s) for s in workload.per_proc)
    bounds = _bounds(cfg, total)
    mechanisms = tuple(cfg["mechanisms"].split(","))
    muts = mutants_for(prog, workload, mechanisms=mechanisms,
                       max_index=int(cfg["max_index"]))
    rep = run_mutation_suite(prog, workload, bounds=bounds, mutants=muts,
                             workers=int(cfg["workers"]))

    _say(f"program {prog.name}: {len(muts) - 1} mutants "
          f"({cfg['mechanisms']}), workers={cfg['workers']}")
    _say(f"  baseline: " + ", ".join(
        f"{k}={_yesno(v)}" for k, v in sorted(rep.baseline.items())))
    for r in rep.results:
        if r.mutant.mechanism == "identity":
            continue
        if r.killed:
            tag = "killed by " + ",".join(r.killed_by)
        elif not r.fired:
            tag = "never fired"
        else:
            tag = "survived"
        _say(f"  {r.mutant.name:<28} {tag}")
    _say(f"  killed={rep.killed} survived={rep.survived} "
          f"neverFired={rep.never_fired} identityClean="
          f"{_yesno(rep.identity_clean)}")

    report = rep.json()
    report.update({"command": "mutate", "config": cfg})
    _emit_report(report, cfg.get("report"))

    armored = rep.identity_clean and (rep.killed >= 1 or len(muts) == 1)
    return EXIT_PASS if armored else EXIT_FAIL


# ---------------------------------------------------------------------------
# agreement


def _parse_inputs(cfg: dict, n: int) -> tuple:
    raw = cfg.get("inputs")
    if not raw:
        return tuple(10 * (i + 1) for i in range(n))
    try:
        vals = tuple(int(x) for x in str(raw).split(","))
    except ValueError:
        raise ConfigurationError(f"inputs must be integers, got {raw!r}")
    if len(vals) != n:
        raise ConfigurationError(f"need {n} inputs, got {len(vals)}")
    return vals


def cmd_agreement(cfg: dict) -> int:
    n = int(cfg["n"])
    problems = []
    if n > LIMITS["agreement_n"] and (cfg["exhaustive"] or cfg["conformance"]):
        problems.append(f"n={n} > {LIMITS['agreement_n']} for exhaustive work")
    if cfg.get("m") is not None and int(cfg["m"]) > LIMITS["m"]:
        problems.append(f"m={cfg['m']} > {LIMITS['m']}")
    _gate(problems, cfg["force"])

    profile = profile_for(cfg["object"], n,
                          m=None if cfg.get("m") is None else int(cfg["m"]),
                          k=None if cfg.get("k") is None else int(cfg["k"]))

    if cfg["conformance"]:
        rep = check_k_ordering(profile, max_nodes=int(cfg["node_limit"]))
        parts = [f"object {profile.tag}", f"n={n}"]
        if profile.m is not None:
            parts.append(f"m={profile.m}")
        if profile.ooo_k is not None:
            parts.append(f"window {profile.ooo_k}")
        _say("sequential ordering check: " + ", ".join(parts))
        _say(f"  ordering bound k={rep.k}: {_yesno(rep.ok)}  "
              f"({rep.alphas} qualifying prefixes, {rep.nodes} nodes, "
              f"worst case {rep.max_outcomes} decisions)")
        for v in rep.violations[:4]:
            _say(f"  violation: {v}")
        report = {"schemaVersion": 1, "command": "agreement",
                  "mode": "conformance", "config": cfg, **rep.json()}
        _emit_report(report, cfg.get("report"))
        return EXIT_PASS if rep.ok else EXIT_FAIL

    inputs = _parse_inputs(cfg, n)
    if cfg["exhaustive"]:
        crash = cfg.get("crash_budget")
        verdict = sweep_agreement(
            profile, inputs,
            crash_budget=None if crash is None else int(crash),
            node_limit=int(cfg["node_limit"]),
            collect_limit=int(cfg["collect_limit"]))
        _say(f"agreement over atomic {profile.tag}, n={n}, "
              f"inputs {list(inputs)}, every schedule with >=1 correct "
              f"process:")
        _say(f"  {verdict.terminal_classes} outcome classes over "
              f"{verdict.nodes} graph nodes")
        _say(f"  decision profiles: {len(verdict.decision_profiles)}, "
              f"worst distinct decisions {verdict.distinct_decisions} "
              f"(bound {verdict.k})")
        _say(f"  collect audits: {verdict.collects_checked}, all "
              f"consistent: {_yesno(verdict.collects_ok)}")
        _say(f"  verdict: {_yesno(verdict.ok)}")
        for f in verdict.failures[:4]:
            _say(f"  failure: {f}")
        report = {"schemaVersion": 1, "command": "agreement",
                  "mode": "exhaustive", "config": cfg, **verdict.json()}
        _emit_report(report, cfg.get("report"))
        return EXIT_PASS if verdict.ok else EXIT_FAIL

    run = run_algorithm_b(None, profile, inputs)
    validation = validate_agreement([run], profile.k)
    discipline = check_step_discipline(run)
    collect_ok = verify_collect_claim(run)
    passed = (not validation["failures"] and not discipline and collect_ok
              and not validation["inconclusiveRuns"])
    decisions = run.json()["decisions"]
    _say(f"agreement over atomic {profile.tag}, n={n}, one round-robin run:")
    _say(f"  decisions {decisions}, winners {list(run.winners)}")
    _say(f"  validity/agreement/termination: "
          f"{_yesno(not validation['failures'])}")
    _say(f"  timestamp discipline: {_yesno(not discipline)}")
    _say(f"  collect snapshot audit: {_yesno(collect_ok)}")
    report = {"schemaVersion": 1, "command": "agreement", "mode": "single",
              "config": cfg, "run": run.json(), "validation": validation,
              "stepDiscipline": discipline, "collectClaim": collect_ok,
              "pass": passed}
    _emit_report(report, cfg.get("report"))
    return EXIT_PASS if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# replay


def cmd_replay(cfg: dict) -> int:
    try:
        with open(cfg["path"]) as fh:
            artifact = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read {cfg['path']}: {exc}")
    try:
        if artifact.get("kind") != "trace":
            raise ConfigurationError(
                f"{cfg['path']} is not a replayable trace artifact")
        prog = make_program(artifact["program"], int(artifact["n"]),
                            **artifact.get("params", {}))
        workload = Workload.from_json(artifact["workload"])
        schedule = schedule_from_json(artifact["trace"]["schedule"])
        choices = tuple(artifact.get("choices", ()))
        recorded = artifact["trace"]
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed trace artifact: {exc}")

    sim = Simulation(prog.layout, prog.start, workload, choices)
    sim.run(schedule)
    replayed = sim.trace().json()
    if replayed == recorded:
        _say(f"replay: identical re-execution "
              f"({len(recorded['steps'])} steps, "
              f"{len(schedule)} schedule items)")
        return EXIT_PASS
    for field in ("steps", "history", "finalObjects", "crashes", "schedule"):
        if replayed.get(field) != recorded.get(field):
            _say(f"replay: DIVERGED at {field}")
            break
    return EXIT_FAIL


# ---------------------------------------------------------------------------
# list-algorithms


def cmd_list(cfg: dict) -> int:
    entries = []
    for name in CATALOG:
        d = make_program(name, 3).describe()
        entries.append(d)
        claims = d["claims"]
        _say(f"{d['name']:<24} {d['implements']:<22} "
              f"{claims['progress']:<10} from {d['baseObjects']}")
    report = {"schemaVersion": 1, "command": "list-algorithms",
              "config": cfg, "algorithms": entries}
    _emit_report(report, cfg.get("report"))
    return EXIT_PASS


# ---------------------------------------------------------------------------
# wiring


def _common(sub, *, report=True):
    sub.add_argument("--config", help="JSON file with defaults for this "
                     "command; flags win on conflict")
    sub.add_argument("--seed", type=int, help="recorded in the report for "
                     "provenance; the suites themselves are deterministic")
    if report:
        sub.add_argument("--report", help="write the JSON report here "
                         "('-' for stdout)")


def _bounds_flags(sub):
    sub.add_argument("--n", type=int, help="process count")
    sub.add_argument("--ops", type=int, help="operations per process")
    sub.add_argument("--values", type=int, help="value domain size")
    sub.add_argument("--crash-budget", type=int, dest="crash_budget")
    sub.add_argument("--node-limit", type=int, dest="node_limit")
    sub.add_argument("--state-limit", type=int, dest="state_limit")
    sub.add_argument("--force", action="store_const", const=True,
                     help="attempt bounds beyond the documented envelope")


_CHECK_DEFAULTS = {"program": None, "n": 3, "ops": 2, "values": None,
                   "crash_budget": 1, "node_limit": 400_000,
                   "state_limit": 2_000_000, "workload": "default",
                   "param": None, "report": None, "emit_trace": None,
                   "force": False, "seed": None}

_MUTATE_DEFAULTS = {"program": None, "n": 3, "ops": 2, "values": None,
                    "crash_budget": 1, "node_limit": 400_000,
                    "state_limit": 2_000_000, "workload": "default",
                    "param": None, "mechanisms": ",".join(MECHANISMS),
                    "max_index": 8, "workers": None, "report": None,
                    "force": False, "seed": None}

_AGREE_DEFAULTS = {"object": None, "n": 3, "k": None, "m": None,
                   "inputs": None, "exhaustive": False, "conformance": False,
                   "crash_budget": None, "node_limit": 3_000_000,
                   "collect_limit": 500, "report": None, "force": False,
                   "seed": None}


def build_parser() -> _Parser:
    parser = _Parser(prog="linlab",
                     description="bounded checking suites for shared-memory "
                                 "implementations")
    subs = parser.add_subparsers(dest="cmd", metavar="command")

    check = subs.add_parser("check", help="linearizability and "
                            "prefix-stable linearizability sweeps")
    check.add_argument("--program", help="catalog entry to check")
    check.add_argument("--workload", choices=("default", "negwitness"))
    check.add_argument("--param", action="append",
                       help="extra program parameter, key=value")
    check.add_argument("--emit-trace", dest="emit_trace",
                       help="write a replayable trace artifact here")
    _bounds_flags(check)
    _common(check)

    mutate = subs.add_parser("mutate", help="systematic step mutations, "
                             "rechecked per mutant")
    mutate.add_argument("--program", help="catalog entry to mutate")
    mutate.add_argument("--workload", choices=("default", "negwitness"))
    mutate.add_argument("--param", action="append",
                        help="extra program parameter, key=value")
    mutate.add_argument("--mechanisms",
                        help=f"comma list from {','.join(MECHANISMS)}")
    mutate.add_argument("--max-index", type=int, dest="max_index")
    mutate.add_argument("--workers", type=int,
                        help="thread pool size (default $LINLAB_WORKERS or 1)")
    _bounds_flags(mutate)
    _common(mutate)

    agree = subs.add_parser("agreement", help="collect-based agreement "
                            "protocol over an atomic container")
    agree.add_argument("--object", choices=PROFILE_TAGS)
    agree.add_argument("--n", type=int)
    agree.add_argument("--k", type=int, help="out-of-order window")
    agree.add_argument("--m", type=int, help="stuttering repeat count")
    agree.add_argument("--inputs", help="comma-separated proposal values")
    agree.add_argument("--exhaustive", action="store_const", const=True,
                       help="every schedule with >=1 correct process")
    agree.add_argument("--conformance", action="store_const", const=True,
                       help="check the sequential ordering bound instead of "
                            "running the protocol")
    agree.add_argument("--crash-budget", type=int, dest="crash_budget")
    agree.add_argument("--node-limit", type=int, dest="node_limit")
    agree.add_argument("--collect-limit", type=int, dest="collect_limit")
    agree.add_argument("--force", action="store_const", const=True)
    _common(agree)

    replay = subs.add_parser("replay", help="re-execute a recorded trace "
                             "artifact and compare")
    replay.add_argument("path", help="trace artifact from check --emit-trace")
    _common(replay, report=False)

    lst = subs.add_parser("list-algorithms", help="print the catalog")
    _common(lst)

    return parser


_COMMANDS = {
    "check": (cmd_check, _CHECK_DEFAULTS),
    "mutate": (cmd_mutate, _MUTATE_DEFAULTS),
    "agreement": (cmd_agreement, _AGREE_DEFAULTS),
    "replay": (cmd_replay, {"path": None, "seed": None}),
    "list-algorithms": (cmd_list, {"report": None, "seed": None}),
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.cmd:
        parser.print_help()
        return EXIT_USAGE
    fn, defaults = _COMMANDS[args.cmd]
    global _summary_stream
    try:
        cfg = _merge_config(args, defaults)
        if args.cmd == "mutate" and cfg.get("workers") is None:
            cfg["workers"] = int(os.environ.get("LINLAB_WORKERS", "1"))
        cfg.pop("cmd", None)
        # keep stdout pure JSON when the report itself goes there
        _summary_stream = sys.stderr if cfg.get("report") == "-" else sys.stdout
        return fn(cfg)
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ConfigurationError, UnknownOperationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LinlabError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
