"""Anisotropic reaction-diffusion toolbox.

Principal eigenvalues with mixed Dirichlet-Neumann boundary conditions,
the survival threshold of the logistic dynamics, bang-bang optimization of
the resource weight, monotone elliptic/parabolic solvers, and exact 1-D
verification against a piecewise shooting oracle.
"""

__version__ = "0.1.0"

from .anisotropy import (AnisotropyNorm, NormConstants, asym1d, certify,
                         custom, ellipse, euclidean, flux, h_eval,
                         unit_sphere_sample)
from .eigen import (EigenOptions, EigenResult, minimize_lambda, minimize_mu,
                    rayleigh_mu, shooting_eigenvalue_1d, survival_threshold)
from .errors import (AnisoKppError, ConfigError, DegenerateBracketError,
                     DegenerateInputError, InfeasibleWeightError,
                     InvalidDomainError, InvalidNormError, OracleFailureError,
                     SolverError, TieOverflowWarning)
from .grid import (Grid, GridFunction, build_grid, distance_to_dirichlet,
                   energy, energy_gradient, flux_form, mass_integral,
                   poincare_constant, tangent_stiffness)
from .pde import (FluxSystemSolver, Outcome, PdeOptions, Reaction, SweepResult,
                  Trajectory, custom_reaction, dissipation_energy,
                  elliptic_residual, elliptic_solve, logistic_reaction,
                  parabolic_solve, parabolic_step, sweep_diffusion,
                  validate_reaction)
from .rearrange import (DECREASING, INCREASING, InequalityReport,
                        TheoremReport, hardy_littlewood_check,
                        monotone_rearrange, polya_check, verify_1d_theorem)
from .weight_opt import (BangBangWeight, OptimizeOptions, OptimizeResult,
                         WeightClass, bang_bang_from_indicator, bathtub,
                         optimize_weight, random_admissible_weight,
                         validate_class)

__all__ = [
    "AnisotropyNorm", "NormConstants", "asym1d", "certify", "custom",
    "ellipse", "euclidean", "flux", "h_eval", "unit_sphere_sample",
    "EigenOptions", "EigenResult", "minimize_lambda", "minimize_mu",
    "rayleigh_mu", "shooting_eigenvalue_1d", "survival_threshold",
    "AnisoKppError", "ConfigError", "DegenerateBracketError",
    "DegenerateInputError", "InfeasibleWeightError", "InvalidDomainError",
    "InvalidNormError", "OracleFailureError", "SolverError",
    "TieOverflowWarning",
    "Grid", "GridFunction", "build_grid", "distance_to_dirichlet", "energy",
    "energy_gradient", "flux_form", "mass_integral", "poincare_constant",
    "tangent_stiffness",
    "FluxSystemSolver", "Outcome", "PdeOptions", "Reaction", "SweepResult",
    "Trajectory", "custom_reaction", "dissipation_energy", "elliptic_residual",
    "elliptic_solve", "logistic_reaction", "parabolic_solve", "parabolic_step",
    "sweep_diffusion", "validate_reaction",
    "DECREASING", "INCREASING", "InequalityReport", "TheoremReport",
    "hardy_littlewood_check", "monotone_rearrange", "polya_check",
    "verify_1d_theorem",
    "BangBangWeight", "OptimizeOptions", "OptimizeResult", "WeightClass",
    "bang_bang_from_indicator", "bathtub", "optimize_weight",
    "random_admissible_weight", "validate_class",
]
