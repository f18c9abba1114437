"""Exception types shared across the package.

Argument validation failures raise plain ValueError. The classes below mark
failures that callers may want to catch and map to process exit codes:
ConfigError -> 4, SolverFailure -> 3, InvariantViolation -> 2.
"""


class SLLGError(Exception):
    """Base class for solver-domain failures."""


class MeshError(SLLGError):
    """Mesh is malformed: degenerate cell, bad index, non-conforming facet."""


class AssemblyError(SLLGError):
    """Finite element assembly failed (names the offending cell)."""


class NormalizationError(SLLGError):
    """A nodal vector with zero length cannot be normalized (names the node)."""


class TimeMismatchError(SLLGError):
    """Two time-indexed objects were combined at different time indices."""


class SolverFailure(SLLGError):
    """Linear solve did not reach the requested tolerance.

    Carries the achieved relative residual and the iteration count.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(SLLGError):
    """Configuration file is unreadable, unparseable, or out of range."""


class InvariantViolation(SLLGError):
    """A runtime invariant check on a computed trajectory failed."""
