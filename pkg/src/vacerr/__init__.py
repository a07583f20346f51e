"""Linear VAC with approximation-error and estimation-error analysis."""

__version__ = "0.1.0"

from .basis import (Basis, FunctionBasis, IndicatorBasis, MonomialBasis, basis_from_dict,
                    basis_from_json, evaluate, indicator_basis, polynomial_basis_2d)
from .bounds import (BoundReport, ErrorDecomposition, IdealVAC, LongLagLimits, bound_sweep,
                     error_decomposition, improved_subspace_bound, long_lag_limits,
                     rayleigh_ritz_eigenvalue_bound, rayleigh_ritz_subspace_bound)
from .diagnostics import (LhatMatrix, MseReport, condition_number, estimate_mse,
                          first_order_errors, lhat, min_condition_number)
from .exceptions import (ConfigError, DegenerateProjectionError, DegenerateSubspaceError,
                         DivisionGuardError, InsufficientDataError, InvalidArgumentError,
                         ResolutionError, SingularMassMatrixError, VacError)
from .geometry import SubspaceRep, orthonormalize, subspace_distances
from .oracles import (OrthogonalizedProjections, double_well_grid_reference, ideal_correlation_from_grid,
                      orthogonalized_projections, ou_ideal_correlation, ou_reference)
from .sde import (DoubleWellSpec, Trajectory, read_trajectory, simulate_double_well, simulate_ou,
                  write_trajectory)
from .vac import (VAC, CorrelationPair, VacSolution, eigenfunction_series, estimate_correlation,
                  estimate_pair, implied_timescales, solve_vac)

__all__ = [
    "__version__",
    "Basis", "FunctionBasis", "IndicatorBasis", "MonomialBasis", "basis_from_dict", "basis_from_json",
    "evaluate", "indicator_basis", "polynomial_basis_2d",
    "BoundReport", "ErrorDecomposition", "IdealVAC", "LongLagLimits", "bound_sweep",
    "error_decomposition", "improved_subspace_bound", "long_lag_limits",
    "rayleigh_ritz_eigenvalue_bound", "rayleigh_ritz_subspace_bound",
    "LhatMatrix", "MseReport", "condition_number", "estimate_mse", "first_order_errors", "lhat",
    "min_condition_number",
    "ConfigError", "DegenerateProjectionError", "DegenerateSubspaceError", "DivisionGuardError",
    "InsufficientDataError", "InvalidArgumentError", "ResolutionError", "SingularMassMatrixError",
    "VacError",
    "SubspaceRep", "orthonormalize", "subspace_distances",
    "OrthogonalizedProjections", "double_well_grid_reference", "ideal_correlation_from_grid",
    "orthogonalized_projections", "ou_ideal_correlation", "ou_reference",
    "DoubleWellSpec", "Trajectory", "read_trajectory", "simulate_double_well", "simulate_ou",
    "write_trajectory",
    "VAC", "CorrelationPair", "VacSolution", "eigenfunction_series", "estimate_correlation",
    "estimate_pair", "implied_timescales", "solve_vac",
]
