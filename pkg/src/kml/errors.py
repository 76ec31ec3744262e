"""Exception types raised across the library."""


class KmlError(Exception):
    """Base class for all library errors."""


class UnsupportedDimensionError(KmlError, ValueError):
    pass


class MeshError(KmlError, ValueError):
    pass


class MeshParseError(MeshError):
    """Malformed mesh document; ``locus`` names the offending field/line."""

    def __init__(self, message, locus=None):
        self.locus = locus
        if locus is not None:
            message = f"{locus}: {message}"
        super().__init__(message)


class DegenerateCellError(KmlError, ValueError):
    def __init__(self, cell, volume):
        self.cell = int(cell)
        self.volume = float(volume)
        super().__init__(f"cell {self.cell} is degenerate (signed volume {self.volume:.3e})")


class SolverError(KmlError, RuntimeError):
    """Linear or eigen solver failure; ``diagnostics`` carries residuals etc."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class TopologyMismatchError(KmlError, AssertionError):
    """Two independent routes disagree on a harmonic dimension (a bug, not user error)."""


class PreconditionError(KmlError, ValueError):
    pass
