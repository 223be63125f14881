"""Exception taxonomy shared across the package.

Checkers report property *violations* as data (verdicts, witness structures);
exceptions are reserved for misuse of the tools themselves.
"""


class LinlabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LinlabError):
    """Caller error: malformed workload, bounds, value outside a bounded domain."""


class CapacityError(LinlabError):
    """A configured search bound was exceeded (node limit, op-count limit, step cap)."""


class CapabilityError(LinlabError):
    """An object was driven outside its capability (e.g. a third process on a
    two-process test&set)."""


class IntegrityError(LinlabError):
    """A decoded word or replayed record is not well-formed."""


class SchedulingError(LinlabError):
    """A schedule item was illegal for the simulation state it was applied to."""


class PointRuleError(LinlabError):
    """A step-point rule produced an assignment that breaks its own claims."""


class HarnessError(LinlabError):
    """The agreement harness reached a state the reduction promises impossible."""


class UnknownOperationError(LinlabError):
    """An OpId was referenced that the history never invoked."""
