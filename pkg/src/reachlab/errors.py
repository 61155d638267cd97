"""Exception types shared across reachlab."""


class DomainError(ValueError):
    """An input violates a mathematical precondition or invariant."""


class PreconditionError(DomainError):
    """A probe was asked to run on an instance that does not satisfy its hypothesis."""


class InputError(Exception):
    """An input file is missing, unreadable or not well-formed JSON."""
