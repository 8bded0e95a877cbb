"""Exception types raised across the package."""


class CavityAQCError(Exception):
    """Base class for all package errors."""


class InvalidSpec(CavityAQCError, ValueError):
    pass


class InvalidInput(CavityAQCError, ValueError):
    pass


class ParseError(CavityAQCError, ValueError):
    """Malformed clause text. Carries the 1-based line and token position."""

    def __init__(self, message, line=None, position=None):
        self.line = line
        self.position = position
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", token {position})" if position is not None else ")")
        super().__init__(message + where)


class GenerationFailed(CavityAQCError, RuntimeError):
    pass


class DegenerateGround(CavityAQCError, ArithmeticError):
    pass


class EmptyResult(CavityAQCError, LookupError):
    """An analytical query had no solution in the searched range."""


class IntegrationError(CavityAQCError, RuntimeError):
    def __init__(self, message, last_time=None):
        self.last_time = last_time
        super().__init__(message if last_time is None else f"{message} (last valid t={last_time:.6g})")
