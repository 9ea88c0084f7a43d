"""Synthetic microstructure image data with exact ground truth.

Generators for 3D concrete-crack volumes (Voronoi minimal-surface and
fractional-Brownian cracks blended into real CT backgrounds), simulated
FIB-SEM slice stacks of Boolean models with shine-through artifacts, and
procedural face-milled surface height maps, plus classical scale-invariant
filtering (Riesz transforms, Hessian percolation) and metrics that close
the generate -> segment -> score loop.
"""

__version__ = "0.1.0"

from .errors import ConfigError, FormatError, GenerationError, MicroforgeError
from .grid import GrayModel, LabelMask, VoxelVolume
from .rng import RandomStream

__all__ = [
    "ConfigError",
    "FormatError",
    "GenerationError",
    "GrayModel",
    "LabelMask",
    "MicroforgeError",
    "RandomStream",
    "VoxelVolume",
    "__version__",
]
