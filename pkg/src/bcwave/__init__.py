"""Boundary control reconstruction for the 1D wave equation, plus geometric
optics and light ray transform utilities."""

from .connecting import DtnMatrix, assemble_dtn, blagoveshchenskii, diagonal
from .control import ControlBasis, project
from .reconstruct import ReconstructionResult
from .wave1d import SourceSignal, SpatialGrid, TimeGrid, dtn_trace, solve_forward

__version__ = "0.1.0"

__all__ = [
    "ControlBasis",
    "DtnMatrix",
    "ReconstructionResult",
    "SourceSignal",
    "SpatialGrid",
    "TimeGrid",
    "assemble_dtn",
    "blagoveshchenskii",
    "diagonal",
    "dtn_trace",
    "project",
    "solve_forward",
]
