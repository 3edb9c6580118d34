"""Exception hierarchy shared by every thermolab module."""


class ThermolabError(Exception):
    """Base class for all library errors."""


class NumericalFailure(ThermolabError):
    """A computation finished but its own consistency checks failed."""


class ConfigError(ThermolabError):
    """Bad user input at the scenario/configuration level."""


# cs_linalg
class OddDimension(ThermolabError, ValueError):
    pass


class NotConformal(ThermolabError, ValueError):
    pass


class Singular(ThermolabError, ValueError):
    pass


class PairingFailure(NumericalFailure):
    pass


class IndexOutOfRange(ThermolabError, IndexError):
    pass


class DimensionMismatch(ThermolabError, ValueError):
    pass


class NotInvariantSplit(ThermolabError, ValueError):
    pass


class MissingTransition(ThermolabError, KeyError):
    pass


class NotInfinitesimallyCS(ThermolabError, ValueError):
    pass


# flow / cocycle
class StepTooLarge(NumericalFailure):
    pass


class MissingFrame(ThermolabError, ValueError):
    pass


class NotTangent(NumericalFailure):
    pass


# analysis
class Blowup(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class TangentCrossing(NumericalFailure):
    pass


class NotClosed(NumericalFailure):
    pass


class NullHomologous(ThermolabError, ValueError):
    pass


class DegenerateBundle(NumericalFailure):
    pass


# cli
class ParseError(ConfigError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class ValidationError(ConfigError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
