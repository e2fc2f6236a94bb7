"""Periodic homogenization of Dirichlet problems with oscillating boundary data."""

from __future__ import annotations

__version__ = "0.1.0"

from .cell import (CoefficientField, HomogenizedTensor, PeriodicGrid, adjoint_field, constant_field, homogenize,
                   homogenized_tensor, laminate_field, solve_correctors, trig_field)
from .diophantine import h_omega, kappa, kappa_many, weak_lp_statistic
from .geometry import boundary_from_spec, circle, classify_boundary, ellipse, superellipse
from .layer import LayerProblem, extend_solution, extension_weights, physical_layer, solve_layer
from .partition import boundary_partition, cz_decompose, partition_of_unity
from .pipeline import OscillatingData, homogenized_data, rate_exponents
