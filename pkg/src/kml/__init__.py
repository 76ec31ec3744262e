"""Discrete Hodge decompositions with mixed boundary conditions and Korn-Maxwell constants."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegenerateCellError,
    KmlError,
    MeshError,
    MeshParseError,
    PreconditionError,
    SolverError,
    TopologyMismatchError,
    UnsupportedDimensionError,
)

__all__ = [
    "DegenerateCellError",
    "KmlError",
    "MeshError",
    "MeshParseError",
    "PreconditionError",
    "SolverError",
    "TopologyMismatchError",
    "UnsupportedDimensionError",
    "__version__",
]
