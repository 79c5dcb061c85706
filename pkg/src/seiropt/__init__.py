"""Optimal-control toolkit for seasonal SEIR epidemic scenarios.

Two solvers for the same finite-horizon problem: a semi-Lagrangian
dynamic-programming scheme on a state grid (global, feedback form) and
projected gradient descent on the control schedule driven by adjoint sweeps
(local, open loop). The combined mode warm-starts the descent from the grid
solution, pairing the global view with the sharper local optimum.
"""

from .checks import (OptimalityReport, check_first_order, check_second_order,
                     hamiltonian_control_hessian)
from .dal import (DalConfig, DalResult, dal_solve, hamiltonian,
                  hamiltonian_control_gradient)
from .hjb import (FeedbackPolicy, GridSpec, ValueGrid, dump_value,
                  interpolate, load_value, reconstruct_trajectory, solve_hjb,
                  synthesize_feedback)
from .models import (BetaSchedule, CostParams, EpidemicParams, Scenario,
                     Variant, lq_fixture, preset, PRESET_NAMES)
from .ode import (AdjointTrajectory, ControlSchedule, TimeGrid, Trajectory,
                  integrate_adjoint, integrate_forward)
from .pipeline import (Solution, evaluate_cost, solve_combined, solve_dal,
                       solve_sl, solve_uncontrolled, trajectory_deviation)

__version__ = "0.1.0"

__all__ = [
    "AdjointTrajectory",
    "BetaSchedule",
    "ControlSchedule",
    "CostParams",
    "DalConfig",
    "DalResult",
    "EpidemicParams",
    "FeedbackPolicy",
    "GridSpec",
    "OptimalityReport",
    "PRESET_NAMES",
    "Scenario",
    "Solution",
    "TimeGrid",
    "Trajectory",
    "ValueGrid",
    "Variant",
    "check_first_order",
    "check_second_order",
    "dal_solve",
    "dump_value",
    "evaluate_cost",
    "hamiltonian",
    "hamiltonian_control_gradient",
    "hamiltonian_control_hessian",
    "integrate_adjoint",
    "integrate_forward",
    "interpolate",
    "load_value",
    "lq_fixture",
    "preset",
    "reconstruct_trajectory",
    "solve_combined",
    "solve_dal",
    "solve_hjb",
    "solve_sl",
    "solve_uncontrolled",
    "synthesize_feedback",
    "trajectory_deviation",
    "__version__",
]
