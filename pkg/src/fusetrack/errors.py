"""Exception hierarchy. Every error raised by the package derives from FuseTrackError."""


class FuseTrackError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 1


class HorizonDegenerate(FuseTrackError):
    """Image row at or above the horizon: the viewing ray never meets the road."""


class InvalidExtent(FuseTrackError):
    pass


class EmptySet(FuseTrackError):
    pass


class DimensionMismatch(FuseTrackError):
    pass


class EmptyDataset(FuseTrackError):
    pass


class NonFinite(FuseTrackError):
    pass


class DegenerateBox(FuseTrackError):
    pass


class EmptyInput(FuseTrackError):
    pass


class NonPositive(FuseTrackError):
    pass


class ConfigError(FuseTrackError):
    exit_code = 2


class ParseError(FuseTrackError):
    exit_code = 3

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(field)
        prefix = ": ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class EvalError(FuseTrackError):
    exit_code = 4
