"""Solver and verifier suite for u_t = u_xx + c u^p on an interval with the
nonlinear nonlocal boundary flux du/dnu = int k(x,y,t) u^l dy.

Two independent solvers (a Green's-function fixed-point iteration and a
direct IMEX finite-difference stepper), a shrinking-floor ladder to the
maximal solution, and residual-based certificates for sub/supersolutions,
comparison, and the uniqueness/nonuniqueness regimes.
"""

from .errors import (ContractionError, KernelWindowError, LadderError,
                     LadderMonotonicityError, RegularizationError,
                     SubsolutionConstructionError)
from .kernel import NeumannHeatKernel, choose_modes, heat_propagate
from .maximal import (Certificate, EpsilonLadder, epsilon_ladder,
                      nonuniqueness_certificate, uniform_exact_trajectory,
                      uniform_exact_value, uniqueness_probe)
from .mol import MolConfig, MolResult, detect_blowup, mol_solve, step_imex
from .ordering import (BoundaryLayerSubsolution, ComparisonReport, OrderReport,
                       SubsolutionSpec, boundary_layer_subsolution, classify,
                       compare_trajectories, interior_subsolution,
                       positivity_check, scheme_tolerance, solution_residual)
from .picard import (GainEstimate, PicardConfig, PicardDiagnostics,
                     apply_integral_operator, estimate_gains, find_horizon,
                     picard_solve)
from .problem import (Coefficient, Grid, IntervalDomain, ProblemSpec,
                      RegularizedDatum, Trajectory, build_grid,
                      compatibility_residual, normal_derivative, quadrature,
                      regularize_initial, validate_problem)

__version__ = "0.1.0"

__all__ = [
    "Certificate", "Coefficient", "ComparisonReport", "ContractionError",
    "EpsilonLadder", "GainEstimate", "Grid", "IntervalDomain",
    "KernelWindowError", "LadderError", "LadderMonotonicityError",
    "MolConfig", "MolResult", "NeumannHeatKernel", "OrderReport",
    "PicardConfig", "PicardDiagnostics", "ProblemSpec", "RegularizedDatum",
    "RegularizationError", "SubsolutionConstructionError", "SubsolutionSpec",
    "BoundaryLayerSubsolution", "Trajectory",
    "apply_integral_operator", "boundary_layer_subsolution", "build_grid",
    "choose_modes", "classify", "compare_trajectories",
    "compatibility_residual", "detect_blowup", "epsilon_ladder",
    "estimate_gains", "find_horizon", "heat_propagate",
    "interior_subsolution", "mol_solve", "nonuniqueness_certificate",
    "normal_derivative", "picard_solve", "positivity_check", "quadrature",
    "regularize_initial", "scheme_tolerance", "solution_residual",
    "step_imex", "uniform_exact_trajectory", "uniform_exact_value",
    "uniqueness_probe", "validate_problem",
]
