"""Solution modes and cost evaluation.

Four ways to produce a (trajectory, schedule, cost) triple for a scenario:
the uncontrolled baseline, the grid solver alone (sl), gradient descent
alone (dal), and descent warm-started from the grid solver's open-loop
schedule (sl-dal). Costs always come from the same left-endpoint rectangle
quadrature, so numbers are comparable across methods.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dal as dal_mod
from . import hjb as hjb_mod
from . import models
from .dal import DalConfig
from .hjb import GridSpec
from .models import Scenario
from .ode import ControlSchedule, TimeGrid, Trajectory, integrate_forward

__all__ = [
    "Solution",
    "evaluate_cost",
    "solve_uncontrolled",
    "solve_sl",
    "solve_dal",
    "solve_combined",
    "trajectory_deviation",
]


@dataclass
class Solution:
    """One solved instance; cost always equals evaluate_cost of the stored
    (trajectory, controls) pair, bit for bit."""

    method: str  # "uncontrolled" | "sl" | "dal" | "sl-dal"
    controls: ControlSchedule
    trajectory: Trajectory
    cost: float
    diagnostics: dict = field(default_factory=dict)


def evaluate_cost(scn: Scenario, traj: Trajectory,
                  controls: ControlSchedule) -> float:
    """J = dt * sum_{n<n_max} l(y_n, u_n, t_n) + g(y_{n_max})."""
    grid = traj.grid
    if controls.grid != grid:
        raise ValueError("trajectory and controls on different grids")
    dt = grid.dt
    J = 0.0
    for n in range(grid.n_max):
        J += dt * models.running_cost(scn, traj.states[n], controls.point(n),
                                      grid.t(n))
    J += models.final_cost(scn, traj.states[grid.n_max])
    return J


def solve_uncontrolled(scn: Scenario, grid: TimeGrid) -> Solution:
    """No-intervention baseline: constant (0, 0), or (0, 1) for the
    border-flow variant where fully open borders mean no control."""
    controls = ControlSchedule.constant(grid, *scn.uncontrolled_point)
    traj = integrate_forward(scn, grid, controls)
    return Solution(method="uncontrolled", controls=controls, trajectory=traj,
                    cost=evaluate_cost(scn, traj, controls))


def solve_sl(scn: Scenario, grid: TimeGrid, spec: GridSpec | None = None,
             backend: str | None = None, keep_value: bool = False) -> Solution:
    """Grid solve plus trajectory reconstruction. keep_value stores the
    ValueGrid and FeedbackPolicy in the diagnostics (hundreds of MB at the
    default resolution; off unless the caller needs the value function)."""
    spec = spec or GridSpec()
    vg, policy = hjb_mod.solve_hjb(scn, spec, grid, backend=backend)
    sol = hjb_mod.reconstruct_trajectory(scn, vg, policy, backend=backend)
    sol.diagnostics["active_fraction"] = vg.active_fraction
    if keep_value:
        sol.diagnostics["value_grid"] = vg
        sol.diagnostics["policy"] = policy
    return sol


def solve_dal(scn: Scenario, grid: TimeGrid,
              initial: ControlSchedule | None = None,
              cfg: DalConfig | None = None,
              backend: str | None = None) -> Solution:
    """Descent from the given (or cold-start) schedule."""
    res = dal_mod.dal_solve(scn, grid, initial=initial, cfg=cfg, backend=backend)
    return Solution(
        method="dal", controls=res.controls, trajectory=res.trajectory,
        cost=res.cost,
        diagnostics={"iterations": res.iterations,
                     "termination": res.termination,
                     "converged": res.converged,
                     "grad_inf": res.grad_inf,
                     "cost_history": res.cost_history})


def solve_combined(scn: Scenario, grid: TimeGrid,
                   spec: GridSpec | None = None,
                   cfg: DalConfig | None = None,
                   backend: str | None = None,
                   keep_value: bool = False) -> Solution:
    """Grid solve, then descent warm-started from its open-loop schedule.

    The grid schedule is feasible by construction, so descent starts at
    exactly the grid cost and can only improve on it.
    """
    sl_sol = solve_sl(scn, grid, spec, backend=backend, keep_value=keep_value)
    res = dal_mod.dal_solve(scn, grid, initial=sl_sol.controls, cfg=cfg,
                            backend=backend)
    sol = Solution(
        method="sl-dal", controls=res.controls, trajectory=res.trajectory,
        cost=res.cost,
        diagnostics={"iterations": res.iterations,
                     "termination": res.termination,
                     "converged": res.converged,
                     "grad_inf": res.grad_inf,
                     "cost_history": res.cost_history,
                     "sl_cost": sl_sol.cost,
                     "sl_controls": sl_sol.controls,
                     "sl_trajectory": sl_sol.trajectory,
                     "active_fraction": sl_sol.diagnostics["active_fraction"]})
    if keep_value:
        sol.diagnostics["value_grid"] = sl_sol.diagnostics["value_grid"]
        sol.diagnostics["policy"] = sl_sol.diagnostics["policy"]
    return sol


def trajectory_deviation(a: Trajectory, b: Trajectory) -> np.ndarray:
    """Per-component sup-norm of the trajectory difference."""
    if a.grid != b.grid:
        raise ValueError("trajectories on different grids")
    return np.max(np.abs(a.states - b.states), axis=0)
