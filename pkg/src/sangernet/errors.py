"""Exception hierarchy shared across the package."""


class SangerNetError(Exception):
    """Base class for all package-specific errors."""


class InvalidSpectrumError(SangerNetError):
    """Eigenvalue list is negative, non-descending, or has the wrong length."""


class DegenerateSpectrumError(SangerNetError):
    """Top eigenvalues are tied (or zero), so eigenvectors are not identifiable."""


class InfeasiblePartitionError(SangerNetError):
    """Requested split of sample columns cannot be realized."""


class GraphGenerationError(SangerNetError):
    """Random graph generation failed to produce a connected graph."""


class InvalidGraphError(SangerNetError):
    """Graph does not meet the structural requirements of an operation."""


class DisconnectedGraphError(InvalidGraphError):
    """Operation requires a connected graph."""


class DegenerateIterateError(SangerNetError):
    """An iterate became rank-deficient where full column rank is required."""


class UndefinedAngleError(SangerNetError):
    """Angle error is undefined for a zero-norm estimate column."""


class InsufficientDataError(SangerNetError):
    """Not enough recorded state to compute the requested diagnostics."""


class ConvergenceError(SangerNetError):
    """An iterative solver did not reach its tolerance within the step budget."""


class ConfigError(SangerNetError):
    """Experiment configuration is structurally invalid."""
