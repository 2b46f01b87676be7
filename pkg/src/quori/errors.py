"""Exception hierarchy shared by all quori modules."""


class QuoriError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(QuoriError, ValueError):
    """A value violates a documented invariant or limit."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class ParseError(QuoriError, ValueError):
    """An input document could not be parsed."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.source = source


class LimitViolation(ValidationError):
    """A command exceeds a platform limit. Carries the full report."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class SingularGeometryError(ValidationError):
    """The requested motion is unreachable for the configured geometry."""


class InfeasibleError(QuoriError):
    """An optimisation or tuning target cannot be met."""

    def __init__(self, message: str, limiting_pose=None):
        super().__init__(message)
        self.limiting_pose = limiting_pose
