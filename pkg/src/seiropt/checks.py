"""Numerical verification of first- and second-order optimality conditions.

Along a computed solution, each time step's control components are
classified as interior or on a bound (within an absolute band of 1e-6), and
the variational inequality is checked per case:

    interior:    |dH/du| <= tol
    lower bound:  dH/du  >= -tol
    upper bound:  dH/du  <= tol

The second-order check verifies positive semi-definiteness of the control
Hessian of H on the relevant components: diagonal entries for the variants
whose Hessian is diagonal, trace and determinant for the border-flow
variant whose Hessian has an off-diagonal coupling. The vaccination
component is skipped wherever its admissible interval is the single point
{0}, and boundary components are exempt from the curvature requirement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models
from .dal import hamiltonian_control_gradient
from .models import LAMBDA_MAX, Scenario, Variant
from .ode import integrate_adjoint
from .pipeline import Solution

__all__ = [
    "BOUNDARY_BAND",
    "INTERIOR",
    "LOWER",
    "UPPER",
    "SKIPPED",
    "OptimalityReport",
    "hamiltonian_control_hessian",
    "check_first_order",
    "check_second_order",
]

BOUNDARY_BAND = 1e-6

INTERIOR = 0
LOWER = 1
UPPER = 2
SKIPPED = 3

_CLASS_NAMES = {INTERIOR: "interior", LOWER: "lower", UPPER: "upper",
                SKIPPED: "skipped"}


@dataclass
class OptimalityReport:
    """Per-step verification record for one condition order."""

    order: int
    tol: float
    times: np.ndarray        # (n_max,)
    classes: np.ndarray      # (n_max, 2) classification codes
    residuals: np.ndarray    # (n_max, 2) dH/du or Hessian diagonal
    step_pass: np.ndarray    # (n_max,) bool
    max_violation: float     # worst excess over tol; 0 when everything passes
    trace: np.ndarray | None = None  # border-flow second order only
    det: np.ndarray | None = None

    @property
    def pass_fraction(self) -> float:
        return float(np.count_nonzero(self.step_pass)) / self.step_pass.size

    @property
    def all_passed(self) -> bool:
        return bool(self.step_pass.all())

    def to_records(self) -> list:
        """One flat dict per time step, ready for CSV serialization."""
        rows = []
        for n in range(self.step_pass.size):
            row = {
                "n": n,
                "t": float(self.times[n]),
                "class_u1": _CLASS_NAMES[int(self.classes[n, 0])],
                "class_u2": _CLASS_NAMES[int(self.classes[n, 1])],
                "residual_u1": float(self.residuals[n, 0]),
                "residual_u2": float(self.residuals[n, 1]),
                "passed": bool(self.step_pass[n]),
            }
            if self.trace is not None:
                row["hessian_trace"] = float(self.trace[n])
                row["hessian_det"] = float(self.det[n])
            rows.append(row)
        return rows


def hamiltonian_control_hessian(scn: Scenario, x, u, t: float) -> np.ndarray:
    """2x2 Hessian of H in the controls (the dynamics are affine in the
    controls, so the adjoint does not appear)."""
    c = scn.costs
    if scn.variant is Variant.LQ1D:
        return np.diag([2.0, 0.0])
    if scn.variant.is_border:
        u1, u2 = u
        tau = t - scn.t0
        dtau = scn.params.delta * tau
        h11 = 2.0 * c.c_lambda * (1.0 + dtau * u2)
        h12 = 2.0 * c.c_lambda * u1 * dtau
        h22 = 2.0 * c.c_phi * (1.0 + dtau * (3.0 * u2 - 2.0))
        return np.array([[h11, h12], [h12, h22]])
    s = x[0]
    return np.diag([2.0 * c.c_lambda,
                    2.0 * (c.c_nu0 + c.c_nu * s * s)])


def _classify(scn: Scenario, u, t: float):
    """Classification codes for both components at one step."""
    u1, u2 = u
    u2m = models.u2_max_at(scn, t)
    if abs(u1 - 0.0) <= BOUNDARY_BAND:
        c1 = LOWER
    elif abs(u1 - LAMBDA_MAX) <= BOUNDARY_BAND:
        c1 = UPPER
    else:
        c1 = INTERIOR
    if u2m == 0.0:
        c2 = SKIPPED
    elif abs(u2 - 0.0) <= BOUNDARY_BAND:
        c2 = LOWER
    elif abs(u2 - u2m) <= BOUNDARY_BAND:
        c2 = UPPER
    else:
        c2 = INTERIOR
    return c1, c2


def _first_order_violation(code: int, g: float, tol: float) -> float:
    if code == INTERIOR:
        return abs(g) - tol
    if code == LOWER:
        return -g - tol
    if code == UPPER:
        return g - tol
    return -np.inf  # skipped


def check_first_order(scn: Scenario, sol: Solution,
                      tol: float = 1e-3) -> OptimalityReport:
    """Variational-inequality residuals of dH/du along the solution.

    The adjoint is recomputed here with the same backward Euler pairing the
    descent solver uses, so the residuals are exactly the gradients it
    drove down.
    """
    grid = sol.trajectory.grid
    n_max = grid.n_max
    adj = integrate_adjoint(scn, grid, sol.trajectory, sol.controls)
    classes = np.zeros((n_max, 2), dtype=np.int8)
    residuals = np.zeros((n_max, 2))
    step_pass = np.ones(n_max, dtype=bool)
    worst = -np.inf
    for n in range(n_max):
        t = grid.t(n)
        y = sol.trajectory.states[n]
        u = sol.controls.point(n)
        g = hamiltonian_control_gradient(scn, y, u, adj.costates[n + 1], t)
        c1, c2 = _classify(scn, u, t)
        classes[n] = (c1, c2)
        residuals[n] = g
        ok = True
        for k, ck in enumerate((c1, c2)):
            v = _first_order_violation(ck, float(g[k]), tol)
            worst = max(worst, v)
            if v > 0.0:
                ok = False
        step_pass[n] = ok
    return OptimalityReport(order=1, tol=tol, times=grid.times()[:n_max],
                            classes=classes, residuals=residuals,
                            step_pass=step_pass,
                            max_violation=float(max(worst, 0.0)))


def check_second_order(scn: Scenario, sol: Solution,
                       tol: float = 1e-8) -> OptimalityReport:
    """Positive semi-definiteness of the control Hessian on the interior
    components: diagonal entries for the diagonal-Hessian variants;
    trace >= -tol and det >= -tol when both components of the border-flow
    variant are interior, the single relevant diagonal entry otherwise."""
    grid = sol.trajectory.grid
    n_max = grid.n_max
    is_border = scn.variant.is_border
    classes = np.zeros((n_max, 2), dtype=np.int8)
    residuals = np.zeros((n_max, 2))
    step_pass = np.ones(n_max, dtype=bool)
    trace = np.zeros(n_max) if is_border else None
    det = np.zeros(n_max) if is_border else None
    worst = -np.inf
    for n in range(n_max):
        t = grid.t(n)
        y = sol.trajectory.states[n]
        u = sol.controls.point(n)
        H = hamiltonian_control_hessian(scn, y, u, t)
        c1, c2 = _classify(scn, u, t)
        classes[n] = (c1, c2)
        residuals[n] = (H[0, 0], H[1, 1])
        checks = []
        if is_border:
            tr = H[0, 0] + H[1, 1]
            d = H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
            trace[n] = tr
            det[n] = d
            if c1 == INTERIOR and c2 == INTERIOR:
                checks = [tr, d]
            elif c1 == INTERIOR:
                checks = [H[0, 0]]
            elif c2 == INTERIOR:
                checks = [H[1, 1]]
        else:
            if c1 == INTERIOR:
                checks.append(H[0, 0])
            if c2 == INTERIOR:
                checks.append(H[1, 1])
        ok = True
        for val in checks:
            v = -float(val) - tol
            worst = max(worst, v)
            if v > 0.0:
                ok = False
        step_pass[n] = ok
    return OptimalityReport(order=2, tol=tol, times=grid.times()[:n_max],
                            classes=classes, residuals=residuals,
                            step_pass=step_pass,
                            max_violation=float(max(worst, 0.0)),
                            trace=trace, det=det)
