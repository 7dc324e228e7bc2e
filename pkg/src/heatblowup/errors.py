"""Exception types shared across the package."""


class BlowupError(Exception):
    """Base class for all package errors."""


class ConfigError(BlowupError, ValueError):
    """Invalid or inconsistent configuration."""


class DimensionError(BlowupError, ValueError):
    """Array lengths that do not match the grid."""


class GeometryError(BlowupError, ValueError):
    """A cut-off window or support escapes the domain or control region."""


class CoverageError(BlowupError, ValueError):
    """A z-grid too short to resolve the support of the localized field."""


class FrameError(BlowupError, ValueError):
    """Similarity variables requested at or past the reference time."""


class RecenterError(BlowupError, ValueError):
    """Recentering parameters outside their validity box."""


class RangeError(BlowupError, ValueError):
    """Evaluation time outside the stored range."""


class SolverError(BlowupError, RuntimeError):
    """Time integration failure (non-finite state, step control failure)."""
