"""Exception hierarchy shared by all modules."""


class CoinvError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(CoinvError, ValueError):
    """Invalid scene, geometry, acquisition or CLI configuration."""


class DomainError(CoinvError, ValueError):
    """An argument lies outside the domain of an operation."""


class SingularityError(DomainError):
    """Evaluation requested at a singular point (e.g. x == y for the kernel)."""


class SolverError(CoinvError, RuntimeError):
    """The boundary integral system is singular or too ill-conditioned."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NumericError(CoinvError, ArithmeticError):
    """A defensive numeric guard tripped."""


class DatasetParseError(CoinvError, ValueError):
    """Malformed dataset file. Carries the offending line number."""

    def __init__(self, message, line=None, field=None):
        where = f"line {line}: " if line is not None else ""
        if field is not None:
            where += f"[{field}] "
        super().__init__(where + message)
        self.line = line
        self.field = field
