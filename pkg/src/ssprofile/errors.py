"""Exception hierarchy. Every failure raised by the package derives from SSProfileError."""


class SSProfileError(Exception):
    """Base class."""


class InvalidArgument(SSProfileError, ValueError):
    pass


class DenominatorVanishing(SSProfileError):
    """r/2 - U (expander) or r/2 + U (shrinker) reached zero."""

    def __init__(self, message, r=None):
        super().__init__(message)
        self.r = r


class StartupDivergence(SSProfileError):
    pass


class NonfiniteOutput(SSProfileError):
    pass


class NoConvergence(SSProfileError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class BallExit(SSProfileError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class IntegrationFailure(SSProfileError):
    """Forward integration stopped early; ``r`` is the radius reached."""

    def __init__(self, message, r=None, kind=None):
        super().__init__(message)
        self.r = r
        self.kind = kind


class FitDegenerate(SSProfileError):
    pass


class Infeasible(SSProfileError):
    def __init__(self, message, tightest=None):
        super().__init__(message)
        self.tightest = tightest


class DivergentRatio(SSProfileError):
    pass


class ConfigError(SSProfileError):
    """Parse or validation failure; ``line`` or ``field`` says where."""

    def __init__(self, message, line=None, field=None):
        super().__init__(message)
        self.line = line
        self.field = field
