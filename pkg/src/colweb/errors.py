"""Exception hierarchy shared by every stage of the interpreter."""

from __future__ import annotations


class ColwebError(Exception):
    """Base class for all interpreter errors."""


class ParseError(ColwebError):
    def __init__(self, message: str, line: int, column: int, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(sorted(set(expected)))
        detail = f"{message} at line {line}, column {column}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class ArityError(ColwebError):
    def __init__(self, predicate: str, first: int, second: int):
        self.predicate = predicate
        super().__init__(
            f"predicate {predicate!r} used with arity {first} and arity {second}"
        )


class UnboundVariable(ColwebError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable {name!r}")


class UnsupportedPattern(ColwebError):
    """An index pattern is not of the form var, var+k, or ground."""


class LoadError(ColwebError):
    """A program is syntactically fine but cannot be loaded."""


class DuplicateAgent(LoadError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"agent {path} declared more than once")


class AbsentAgent(ColwebError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"no agent or class instance at {path}")


class CycleError(ColwebError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"cyclic dependency through {path}")


class SolveFailure(ColwebError):
    """The goal or knowledge body is not derivable."""


class MissingArgument(ColwebError):
    def __init__(self, var: str):
        self.var = var
        super().__init__(f"no argument supplied for 'ada {var}'")


class LimitExceeded(ColwebError):
    """A resource limit ran out before the search finished."""


class DepthExceeded(LimitExceeded):
    pass


class RoundsExceeded(LimitExceeded):
    pass
