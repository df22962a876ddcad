"""Exception taxonomy shared by the whole engine.

Everything raised on purpose derives from EngineError so callers (and the
CLI) can distinguish engine failures from genuine bugs.
"""


class EngineError(Exception):
    """Base class for all expected engine failures."""


class ConfigError(EngineError):
    """Invalid engine configuration (page size, fanout, cost constants...)."""


class ValidationError(EngineError):
    """A row violates the table schema invariants."""


class AddressError(EngineError):
    """A block number or RowId points outside the segment."""


class CatalogError(EngineError):
    """Reference to an unknown table or column."""


class UsageError(EngineError):
    """An operation was called with incompatible operands."""


class PlanningError(EngineError):
    """The planner cannot form a plan (missing statistics, bad predicate)."""


class ExecutionError(EngineError):
    """A plan references resources the executor was not given."""


class ScenarioError(EngineError):
    """Unknown benchmark scenario or unusable scale."""
