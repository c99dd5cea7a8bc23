"""Shared exception types.

The CLI maps these onto exit codes, so the split matters:
``ValueError`` subclasses mean malformed input, ``VerificationError``
means a well-formed instance failed a checked property, and
``ResourceCapError`` means a deliberate size cap was exceeded.
"""


class BubbletreeError(Exception):
    """Base class for package errors."""


class InputError(BubbletreeError, ValueError):
    """Malformed or inconsistent input data."""


class VerificationError(BubbletreeError):
    """A verification pass rejected the instance, with a reason."""


class ResourceCapError(BubbletreeError):
    """A computation was refused because it exceeds a documented cap."""
