"""Exception hierarchy.

Every error carries a short machine-readable ``category`` that the command
line front end reports on failure.
"""


class IonCorrError(Exception):
    category = "internal"


class DomainError(IonCorrError, ValueError):
    """An argument lies outside the domain of the operation."""

    category = "domain"


class DivergentLimitError(DomainError):
    """The elastic limit diverges because the coherent intensity vanishes."""

    category = "divergent_limit"


class ConvergenceError(IonCorrError, RuntimeError):
    category = "convergence"

    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class ConfigError(IonCorrError, ValueError):
    """Invalid run configuration; ``field`` names the offending key."""

    category = "validation"

    def __init__(self, message, field=None, line=None, column=None):
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}, column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line
        self.column = column


class ConfigParseError(ConfigError):
    category = "parse"


class NotDestructiveWarning(UserWarning):
    """The destructive-direction approximation was used outside its regime."""
