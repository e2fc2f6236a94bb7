"""Finite element laboratory: meshes, P1 solves and convergence experiments."""

from .experiments import (RateReport, constant_coeff_experiment, higher_order_experiment, layer_expansion_check,
                          oscillating_coeff_experiment, rate_fit)
from .fem import SolveResult, l2_error, solve_dirichlet
from .mesh import DomainSpec, MeshedDomain, mesh
