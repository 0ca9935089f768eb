"""Exception hierarchy shared by the library and the CLI."""


class HingeAggError(Exception):
    """Base class for every error raised by hingeagg."""


class DomainError(HingeAggError, ValueError):
    """A rule is evaluated on an atom it does not define."""


class ParameterError(HingeAggError, ValueError):
    """A construction's parameters violate one or more of its constraints."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConsistencyError(HingeAggError, RuntimeError):
    """Two independent computations of the same quantity disagree."""


class NumericError(HingeAggError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class FormatError(HingeAggError, ValueError):
    """A text input file could not be parsed."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")
