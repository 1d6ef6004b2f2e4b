"""Exception types raised by the package."""


class InvalidArgumentError(ValueError):
    """An argument is outside the domain of the operation."""


class NumericalSingularityError(ArithmeticError):
    """A matrix that must be inverted is singular to working precision."""


class InfeasibleError(ValueError):
    """Linear constraints on a weight vector admit no solution."""


class ConfigError(ValueError):
    """A run configuration could not be parsed or resolved.

    ``field`` names the offending key path (``"scenario.z"``) and ``line``
    the line in the config file, when known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
