"""Reactive settling simulation for clarifier-thickener vessels.

One-dimensional finite-difference runs of coupled sedimentation,
compression, dispersion and denitrification in a vessel with varying
cross-section, with an explicit time stepper that provably keeps states
admissible under its stability budget, an independent percentage-based
scheme for cross-validation, refinement/validation instruments, an HTTP
service, and a command-line client.

Typical use::

    from settlesim import load_scenario, simulate
    result = simulate(load_scenario("example1"), n_cells=128,
                      horizon=9 * 3600.0)
"""
from .builtins import BUILTIN_NAMES, builtin_spec
from .config import ScenarioSpec, compile_spec, load_scenario, load_spec, write_spec
from .constitutive import ConstitutiveSet, SupNorms
from .errors import (ConfigurationError, DomainError, InvariantViolationError,
                     SettlesimError)
from .geometry import AreaProfile, AreaSegment, Grid, build_grid
from .harness import (CflCurve, ErrorReport, MethodComparison, cfl_curve,
                      characteristic_speeds, compare_methods,
                      convergence_study, mass_balance_audit, observed_order,
                      project_fine_to_coarse, relative_l1_error,
                      total_variation)
from .percentage_scheme import XpBudget, godunov_flux, simulate_xp, xp_budget
from .reactions import DenitrificationKinetics, ReactionBounds, ReactionModel
from .scenario import BoundaryData, Scenario, Schedule
from .semidiscrete import (State, make_ode_rhs, rhs_from_boundary,
                           water_concentration)
from .stepping import (CflBudget, RunReport, RunResult, compute_budget,
                       simulate, step_once)

__version__ = "0.1.0"

__all__ = [
    "AreaProfile",
    "AreaSegment",
    "BUILTIN_NAMES",
    "BoundaryData",
    "CflBudget",
    "CflCurve",
    "ConfigurationError",
    "ConstitutiveSet",
    "DenitrificationKinetics",
    "DomainError",
    "ErrorReport",
    "Grid",
    "InvariantViolationError",
    "MethodComparison",
    "ReactionBounds",
    "ReactionModel",
    "RunReport",
    "RunResult",
    "Scenario",
    "ScenarioSpec",
    "Schedule",
    "SettlesimError",
    "State",
    "SupNorms",
    "XpBudget",
    "builtin_spec",
    "build_grid",
    "cfl_curve",
    "characteristic_speeds",
    "compare_methods",
    "compile_spec",
    "compute_budget",
    "convergence_study",
    "godunov_flux",
    "load_scenario",
    "load_spec",
    "make_ode_rhs",
    "mass_balance_audit",
    "observed_order",
    "project_fine_to_coarse",
    "relative_l1_error",
    "rhs_from_boundary",
    "simulate",
    "simulate_xp",
    "step_once",
    "total_variation",
    "water_concentration",
    "write_spec",
    "__version__",
]
