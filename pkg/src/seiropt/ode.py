"""Time grids and forward/backward integration.

The forward state sweep and the backward adjoint sweep share one uniform
grid. Euler is the default for both (the discrete gradient used by the
descent solver is exact under this pairing); RK4 is available for accuracy
studies with the control held constant over each step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models
from .models import Scenario

__all__ = [
    "TimeGrid",
    "ControlSchedule",
    "Trajectory",
    "AdjointTrajectory",
    "IntegrationBlowupError",
    "integrate_forward",
    "integrate_adjoint",
]


class IntegrationBlowupError(RuntimeError):
    """Non-finite value produced while time stepping."""

    def __init__(self, step: int, what: str = "state"):
        super().__init__(f"non-finite {what} at time step {step}")
        self.step = step


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    n_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.T <= self.t0:
            raise ValueError("T must be > t0")

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n_max

    def t(self, n: int) -> float:
        return self.t0 + n * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_max + 1)

    @classmethod
    def for_scenario(cls, scn: Scenario, dt: float = 0.05) -> "TimeGrid":
        """Grid with the step closest to dt that divides the horizon."""
        n = max(1, round((scn.T - scn.t0) / dt))
        return cls(scn.t0, scn.T, n)


@dataclass(frozen=True)
class ControlSchedule:
    """Node-sampled controls, held constant over [t_n, t_{n+1})."""

    grid: TimeGrid
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        n = self.grid.n_max + 1
        if len(self.u1) != n or len(self.u2) != n:
            raise ValueError("control arrays must have n_max+1 entries")

    def point(self, n: int) -> tuple:
        return (float(self.u1[n]), float(self.u2[n]))

    @classmethod
    def constant(cls, grid: TimeGrid, u1: float, u2: float) -> "ControlSchedule":
        n = grid.n_max + 1
        return cls(grid, np.full(n, float(u1)), np.full(n, float(u2)))


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray  # (n_max+1, 3)

    def __post_init__(self):
        if self.states.shape != (self.grid.n_max + 1, 3):
            raise ValueError("states must have shape (n_max+1, 3)")


@dataclass(frozen=True)
class AdjointTrajectory:
    grid: TimeGrid
    costates: np.ndarray  # (n_max+1, 3)


def integrate_forward(scn: Scenario, grid: TimeGrid,
                      controls: ControlSchedule,
                      method: str = "euler") -> Trajectory:
    """Integrate the state equations from scn.x0 over the grid."""
    if controls.grid != grid:
        raise ValueError("controls defined on a different grid")
    n_max = grid.n_max
    dt = grid.dt
    ys = np.empty((n_max + 1, 3))
    ys[0] = scn.x0
    y = np.array(scn.x0, dtype=float)

    for n in range(n_max):
        t = grid.t(n)
        u = controls.point(n)
        if method == "euler":
            y = y + dt * models.dynamics(scn, y, u, t)
        elif method == "rk4":
            k1 = models.dynamics(scn, y, u, t)
            k2 = models.dynamics(scn, y + 0.5 * dt * k1, u, t + 0.5 * dt)
            k3 = models.dynamics(scn, y + 0.5 * dt * k2, u, t + 0.5 * dt)
            k4 = models.dynamics(scn, y + dt * k3, u, t + dt)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            raise ValueError(f"unknown method {method!r}")
        if not np.all(np.isfinite(y)):
            raise IntegrationBlowupError(n + 1)
        ys[n + 1] = y
    return Trajectory(grid, ys)


def integrate_adjoint(scn: Scenario, grid: TimeGrid, traj: Trajectory,
                      controls: ControlSchedule,
                      method: str = "euler") -> AdjointTrajectory:
    """Integrate the costate equations backward from p(T) = grad g(y(T)).

    The Euler step is the reverse-time explicit step
        p_n = p_{n+1} + dt * (grad_y f(y_n,u_n,t_n)^T p_{n+1}
                              + grad_y l(y_n,u_n,t_n)),
    which makes the assembled control gradient the exact gradient of the
    Euler-discretized cost.
    """
    if traj.grid != grid or controls.grid != grid:
        raise ValueError("trajectory/controls defined on a different grid")
    n_max = grid.n_max
    dt = grid.dt
    ps = np.empty((n_max + 1, 3))
    p = models.grad_final_cost(scn, traj.states[n_max])
    ps[n_max] = p

    for n in range(n_max - 1, -1, -1):
        t = grid.t(n)
        y = traj.states[n]
        u = controls.point(n)
        if method == "euler":
            J = models.grad_dynamics_state(scn, y, u, t)
            lg = models.grad_cost_state(scn, y, u, t)
            # J^T p + lg unrolled in the kernels' summation order; numpy's
            # matmul reorders the sums and would break bit-level agreement
            # with the compiled backends
            p = np.array([
                p[0] + dt * (J[0, 0] * p[0] + J[1, 0] * p[1]
                             + J[2, 0] * p[2] + lg[0]),
                p[1] + dt * (J[0, 1] * p[0] + J[1, 1] * p[1]
                             + J[2, 1] * p[2] + lg[1]),
                p[2] + dt * (J[0, 2] * p[0] + J[1, 2] * p[1]
                             + J[2, 2] * p[2] + lg[2]),
            ])
        elif method == "rk4":
            # reverse RK4 with (y_n, u_n) frozen over the step, consistent
            # with the zero-order hold of the forward sweep
            J = models.grad_dynamics_state(scn, y, u, t).T
            lg = models.grad_cost_state(scn, y, u, t)
            rhs = lambda q: J @ q + lg
            k1 = rhs(p)
            k2 = rhs(p + 0.5 * dt * k1)
            k3 = rhs(p + 0.5 * dt * k2)
            k4 = rhs(p + dt * k3)
            p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            raise ValueError(f"unknown method {method!r}")
        if not np.all(np.isfinite(p)):
            raise IntegrationBlowupError(n, what="costate")
        ps[n] = p
    return AdjointTrajectory(grid, ps)
