"""Kobayashi-Warren-Carter energies, single-well Modica-Mortola recovery sequences,
set-valued limits and sliced graph metrics."""

__version__ = "0.1.0"

from .errors import (DegenerateSlice, EpsilonTooLarge, InvalidArgument, KWCError, NumericFailure,
                     PropertyViolation)
from .grid import GridField, read_field, write_field
from .kernels import BACKEND
from .potential import (G, PotentialSpec, WeightSpec, alpha_min, check_assumptions, quadratic, quartic,
                        sigma_jump_cost, weight_quadratic, weight_shifted)

__all__ = [
    "__version__", "BACKEND", "GridField", "read_field", "write_field",
    "PotentialSpec", "WeightSpec", "G", "alpha_min", "check_assumptions", "quadratic", "quartic",
    "sigma_jump_cost", "weight_quadratic", "weight_shifted",
    "KWCError", "InvalidArgument", "NumericFailure", "DegenerateSlice", "EpsilonTooLarge", "PropertyViolation",
]
