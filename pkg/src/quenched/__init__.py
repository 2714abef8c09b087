"""Numerical laboratory for randomly perturbed partially expanding torus maps.

Submodules are imported on demand so that the command line can configure
threading before numpy loads.
"""

__version__ = "0.1.0"

__all__ = [
    "dynamics",
    "noise",
    "transfer",
    "spectral",
    "captivity",
    "cohomology",
    "correlations",
    "cli",
]
