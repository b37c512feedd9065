"""Exception hierarchy shared across the package."""


class OrdsegError(Exception):
    """Base class for all ordseg errors."""


class ValidationError(OrdsegError):
    """An input violated a documented precondition or invariant."""


class OrderStructureError(ValidationError):
    """The class-order graph is malformed (cycle, bad index, duplicate edge)."""


class FormatError(OrdsegError):
    """A file did not conform to its on-disk format."""
