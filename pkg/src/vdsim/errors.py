"""Exception hierarchy shared across vdsim."""


class VdsimError(Exception):
    """Base class for all vdsim errors."""


class ConfigError(VdsimError, ValueError):
    """Invalid experiment configuration. ``field`` names the offending key path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class SchemaError(VdsimError, ValueError):
    def __init__(self, missing, context="dataset"):
        self.missing = list(missing)
        super().__init__(f"{context} is missing columns: {', '.join(self.missing)}")


class PoolExhausted(VdsimError):
    """Too few cause-strike survivors to guarantee a seated jury."""


class SheetError(VdsimError, ValueError):
    """Malformed strike sheet."""


class EmptyGroupError(VdsimError, ValueError):
    def __init__(self, group, side=None):
        self.group = group
        where = f" for {side}" if side else ""
        super().__init__(f"strike group '{group}'{where} is empty")


class RankDeficientError(VdsimError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"design matrix is rank deficient: column '{column}' is collinear with earlier columns")


class InsufficientDataError(VdsimError, ValueError):
    pass


class StateBudgetExceeded(VdsimError, MemoryError):
    """The equilibrium solver visited more states than its budget allows."""


class InvariantViolation(VdsimError, AssertionError):
    """An internal consistency check failed."""
