"""Exception hierarchy shared by every pipeline stage."""


class SpikelinkError(Exception):
    """Base class for all errors raised by this package."""


class WidthMismatch(SpikelinkError, ValueError):
    def __init__(self, expected, got):
        super().__init__(f"frame width {got} does not match declared width {expected}")
        self.expected = expected
        self.got = got


class RangeViolation(SpikelinkError, ValueError):
    def __init__(self, index, value):
        super().__init__(f"value {value!r} at index {index} is outside [-1, 1]")
        self.index = index
        self.value = value


class NonFinite(SpikelinkError, ValueError):
    pass


class DimensionMismatch(SpikelinkError, ValueError):
    pass


class IndexOutOfRange(SpikelinkError, IndexError):
    pass


class BadRange(SpikelinkError, ValueError):
    pass


class SingularSystem(SpikelinkError, ArithmeticError):
    pass


class UnknownNeuron(SpikelinkError, IndexError):
    pass


# graph construction / execution

class UnknownStageKind(SpikelinkError, ValueError):
    pass


class PortMismatch(SpikelinkError, ValueError):
    pass


class CycleError(SpikelinkError, ValueError):
    pass


class NoPath(SpikelinkError, ValueError):
    pass


class StageFailure(SpikelinkError, RuntimeError):
    """A stage raised during a tick; ``report`` holds the partial run report."""

    def __init__(self, name, cause, report=None):
        super().__init__(f"stage {name!r} failed: {cause!r}")
        self.name = name
        self.cause = cause
        self.report = report


class CollisionHalt(SpikelinkError, RuntimeError):
    pass


# benchmarks

class BracketInvalid(SpikelinkError, ValueError):
    pass


class NoResponse(SpikelinkError, RuntimeError):
    pass


# configuration

class ConfigError(SpikelinkError, ValueError):
    pass


class ConfigSyntaxError(ConfigError):
    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
        self.line = line
        self.column = column


class UnknownKey(ConfigError):
    def __init__(self, section, key):
        super().__init__(f"unknown key {key!r} in section [{section}]")
        self.section = section
        self.key = key


class DanglingConnection(ConfigError):
    pass
