"""Exception types shared across the package."""


class FairauditError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(FairauditError):
    """A record, feature value, or similarity spec does not match the schema."""


class EmptyDataError(FairauditError):
    """No usable records were supplied."""


class ConfigError(FairauditError):
    """Invalid or inconsistent run configuration."""


class SolverError(FairauditError):
    """The LP solver failed to reach an optimum."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = tuple(trace) if trace else ()


class DegenerateFaceError(SolverError):
    """The dual-face program is unbounded or empty.

    Usually means the primary optimum passed in was not tight, or the
    requested direction leaves the domain of the value function.
    """


class ProtocolError(FairauditError):
    """A model source (file join or HTTP endpoint) violated its contract."""
