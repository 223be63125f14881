"""Deterministic laboratory for linearizability experiments on simulated shared memory."""

from .agreement import (algorithm_b_program, atomic_object_program,
                        check_k_ordering, check_step_discipline, profile_for,
                        run_algorithm_b, sweep_agreement, validate_agreement,
                        verify_collect_claim)
from .checker import (Bounds, RunGraph, brute_history, brute_strong,
                      check_history, check_strong, step_point_check,
                      sweep_budgets, sweep_invariants, sweep_linearizable,
                      sweep_step_points)
from .codec import binary_adjust, decode_binary_view, decode_unary_max, unary_delta
from .errors import (CapabilityError, CapacityError, ConfigurationError,
                     HarnessError, IntegrityError, LinlabError, PointRuleError,
                     SchedulingError, UnknownOperationError)
from .model import (BOT, EMPTY, EPS, OK, Event, History, LinEntry, OpId,
                    is_linearization_of, validate_history)
from .mutate import MECHANISMS, Mutant, mutants_for, mutated_program, run_mutation_suite
from .objects import KINDS, ObjectSpec, ObjectTable, apply_action
from .programs import CATALOG, PROGRAMS, Program, default_workload, make_program
from .scheduler import Crash, OpContext, Simulation, Trace, Workload, trace_from_json
from .specs import SPEC_FACTORIES, SequentialSpec, make_spec

__version__ = "0.1.0"

__all__ = [
    "BOT", "CATALOG", "EMPTY", "EPS", "KINDS", "MECHANISMS", "OK",
    "PROGRAMS", "SPEC_FACTORIES",
    "Bounds", "CapabilityError", "CapacityError", "ConfigurationError",
    "Crash", "Event", "HarnessError", "History", "IntegrityError",
    "LinEntry", "LinlabError", "Mutant", "ObjectSpec", "ObjectTable",
    "OpContext", "OpId", "PointRuleError", "Program", "RunGraph",
    "SchedulingError", "SequentialSpec", "Simulation", "Trace",
    "UnknownOperationError", "Workload",
    "algorithm_b_program", "apply_action", "atomic_object_program",
    "binary_adjust", "brute_history", "brute_strong", "check_history",
    "check_k_ordering", "check_step_discipline", "check_strong",
    "decode_binary_view", "decode_unary_max", "default_workload",
    "is_linearization_of", "make_program", "make_spec", "mutants_for",
    "mutated_program", "profile_for", "run_algorithm_b",
    "run_mutation_suite", "step_point_check", "sweep_agreement",
    "sweep_budgets", "sweep_invariants", "sweep_linearizable",
    "sweep_step_points", "trace_from_json", "unary_delta",
    "validate_agreement", "validate_history", "verify_collect_claim",
]
