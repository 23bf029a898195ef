"""Spectral data of reflectionless Jacobi matrices: Krein functions, half-line
measures, torus coordinates, finite-gap approximation and Toda flows."""

from .errors import NumericalError, ValidationError
from .krein import KreinFunction, constant_A, eval_H, extract_measure
from .measures import SpectralMeasure, SplitSpec, split_nu, stieltjes, total_mass, weak_star_distance
from .sets import FiniteGapSet, Interval, delta_metric, gaps, hausdorff, lebesgue_symmdiff
from .spectral import (
    JacobiMatrix,
    TorusPoint,
    green_function,
    h_function,
    is_reflectionless,
    jacobi_from_torus,
    reconstruct_from_halfline,
    xi_from_J,
    xi_from_torus,
)

__version__ = "0.1.0"

__all__ = [
    "FiniteGapSet",
    "Interval",
    "JacobiMatrix",
    "KreinFunction",
    "NumericalError",
    "SpectralMeasure",
    "SplitSpec",
    "TorusPoint",
    "ValidationError",
    "constant_A",
    "delta_metric",
    "eval_H",
    "extract_measure",
    "gaps",
    "green_function",
    "h_function",
    "hausdorff",
    "is_reflectionless",
    "jacobi_from_torus",
    "lebesgue_symmdiff",
    "reconstruct_from_halfline",
    "split_nu",
    "stieltjes",
    "total_mass",
    "weak_star_distance",
    "xi_from_J",
    "xi_from_torus",
]
