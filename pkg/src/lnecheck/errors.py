"""Exception hierarchy shared by the library and the CLI."""


class LneError(Exception):
    """Base class for every error raised by lnecheck."""


class DomainError(LneError, ValueError):
    """A point lies outside the domain of a transform."""


class DimensionMismatch(LneError, ValueError):
    pass


class EmptySample(LneError):
    pass


class EvalError(LneError):
    """A user expression could not be evaluated."""


class ScaleError(LneError):
    """The neighbor scale is too small (or too large) for the sample."""


class InsufficientTail(LneError):
    """Too few points in an extreme radial band."""


class QuadratureFailure(LneError):
    pass


class Unreachable(LneError):
    """Two points lie in different connected components."""


class DescriptorError(LneError, ValueError):
    """A descriptor or corpus file is malformed.

    ``line`` carries the 1-based line number of the offending entry when it
    is known, so the CLI can name it.
    """

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)
