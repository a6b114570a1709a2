"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "TreebedError",
    "FormatError",
    "DisconnectedGraphError",
    "MetricError",
    "CutSelectionError",
    "InvariantError",
]


class TreebedError(Exception):
    """Base class for every error raised by this package."""


class FormatError(TreebedError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
        if line is not None:
            prefix += f"{line}:"
        if prefix:
            prefix += " "
        super().__init__(prefix + message)


class DisconnectedGraphError(TreebedError):
    """Graph is not connected; names one unreachable vertex pair."""

    def __init__(self, u: int, v: int):
        self.u = int(u)
        self.v = int(v)
        super().__init__(f"graph is disconnected: no path between vertices {u} and {v}")


class MetricError(TreebedError):
    """An input violates a metric-space or graph invariant."""


class CutSelectionError(TreebedError):
    """Interval deletion emptied the admissible shell.

    The construction guarantees a surviving radius, so reaching this state
    signals an implementation bug, never a legal outcome. The partial
    certificate is attached for post-mortem inspection.
    """

    def __init__(self, message: str, certificate=None):
        self.certificate = certificate
        super().__init__(message)


class InvariantError(TreebedError):
    """A construction postcondition failed at runtime."""
