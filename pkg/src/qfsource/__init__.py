"""Quantized electromagnetic field driven by classical currents.

Mode-lattice expectation values, a retarded-integral reference solver,
single-mode closed forms, radiation rates and smeared-field variances.
"""
from .core import (DEFAULT_TOLERANCES, QFSourceError, QuadratureError, SingularPointError,
                   ThresholdError, Tolerances, UnitModeError, UnitSystem)
from .mode_basis import ModeLattice, build_lattice

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOLERANCES", "QFSourceError", "QuadratureError", "SingularPointError",
    "ThresholdError", "Tolerances", "UnitModeError", "UnitSystem", "ModeLattice", "build_lattice",
]
