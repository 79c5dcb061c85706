"""Controlled SEIR model variants, schedules, costs, and analytic gradients.

All model state is reduced to the three fractions (s, e, i); the recovered
fraction follows from conservation (or from its own quadrature for the
border-flow variant, where total population grows with immigration).

Controls are a 2-vector (u1, u2). u1 is always the mobility-restriction
intensity lambda in [0, 0.9]. u2 is the vaccination rate nu in
[0, nu_max(t)] for the vaccinating variants and the border openness phi in
[0, 1] for the border-flow variant.

Everything here is scalar reference code: clear, unvectorized, and the
ground truth that the fast kernels and all oracles are validated against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Variant",
    "BetaSchedule",
    "EpidemicParams",
    "CostParams",
    "Scenario",
    "beta_at",
    "nu_max_at",
    "u2_max_at",
    "dynamics",
    "running_cost",
    "final_cost",
    "grad_dynamics_state",
    "grad_dynamics_control",
    "grad_cost_state",
    "grad_cost_control",
    "grad_final_cost",
    "preset",
    "PRESET_NAMES",
]


class Variant(Enum):
    """Model variants. The first five are the public epidemic scenarios;
    LQ1D is a built-in scalar linear-quadratic fixture used to validate the
    descent solver against a closed-form solution."""

    BASIC = "basic"
    TEMPORARY_IMMUNITY = "temporary_immunity"
    BORDER_CONTROL = "border_control"
    BASIC_CONSTRAINED = "basic_constrained"
    IMMUNITY_CONSTRAINED = "immunity_constrained"
    LQ1D = "lq1d"

    @property
    def is_border(self) -> bool:
        return self is Variant.BORDER_CONTROL

    @property
    def has_immunity_loss(self) -> bool:
        return self in (Variant.TEMPORARY_IMMUNITY, Variant.IMMUNITY_CONSTRAINED)

    @property
    def is_constrained(self) -> bool:
        return self in (Variant.BASIC_CONSTRAINED, Variant.IMMUNITY_CONSTRAINED)

    @property
    def conservative(self) -> bool:
        # s+e+i+r constant or shrinking; border inflow breaks this
        return self is not Variant.BORDER_CONTROL


# integer codes shared with the compiled kernels
VARIANT_CODES = {
    Variant.BASIC: 0,
    Variant.TEMPORARY_IMMUNITY: 1,
    Variant.BORDER_CONTROL: 2,
    Variant.BASIC_CONSTRAINED: 3,
    Variant.IMMUNITY_CONSTRAINED: 4,
    Variant.LQ1D: 5,
}

LAMBDA_MAX = 0.9


@dataclass(frozen=True)
class BetaSchedule:
    """Piecewise-constant transmission rate over the year (tau mod 4).

    Segments are (lo, hi, value) with closed endpoints, checked in order;
    the first match wins and `default` applies outside all segments. The
    default instance is the seasonal rate: 4 during the trimester [2, 3]
    of each 4-trimester year, 16 the rest of the year.
    """

    segments: tuple = ((2.0, 3.0, 4.0),)
    default: float = 16.0

    def __post_init__(self):
        for lo, hi, val in self.segments:
            if not (0.0 <= lo <= hi <= 4.0):
                raise ValueError(f"beta segment [{lo}, {hi}] outside [0, 4]")
            if val <= 0.0:
                raise ValueError("beta values must be > 0")
        if self.default <= 0.0:
            raise ValueError("beta default must be > 0")

    def at(self, t: float) -> float:
        x = t % 4.0  # python-style mod, matching the kernels for t < 0 too
        for lo, hi, val in self.segments:
            if lo <= x <= hi:
                return val
        return self.default


@dataclass(frozen=True)
class EpidemicParams:
    epsilon: float = 9.0        # inverse latency, per trimester
    gamma: float = 4.0          # inverse infectious period, per trimester
    mu: float = 0.0             # inverse immunity duration (immunity-loss variants)
    p: float = 0.9              # vaccine efficacy
    delta: float = 0.0          # total border inflow rate (border variant)
    delta_fracs: tuple = (0.5, 0.01, 0.005, 0.485)  # inflow split (s, e, i, r)
    beta_schedule: BetaSchedule = field(default_factory=BetaSchedule)

    def __post_init__(self):
        if self.epsilon <= 0 or self.gamma <= 0:
            raise ValueError("epsilon and gamma must be > 0")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if not (0.0 < self.p <= 1.0):
            raise ValueError("p must be in (0, 1]")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if len(self.delta_fracs) != 4:
            raise ValueError("delta_fracs must have 4 entries")
        if abs(sum(self.delta_fracs) - 1.0) > 1e-12:
            raise ValueError("delta_fracs must sum to 1")

    @property
    def deltas(self) -> tuple:
        """Per-compartment inflow rates (delta_1..delta_4)."""
        return tuple(self.delta * f for f in self.delta_fracs)


@dataclass(frozen=True)
class CostParams:
    c1: float = 3.5
    c2: float = 14.0
    c_lambda: float = 0.35
    c_nu0: float = 0.025
    c_nu: float = 0.05
    c_phi: float = 0.15
    c_i: float = 35.0
    c_e: float = 35.0
    i_bar: float = 0.0
    e_bar: float = 0.0
    penalty_weight: float = 1e3
    i_max: float = 0.13

    def __post_init__(self):
        for name in ("c1", "c2", "c_lambda", "c_nu0", "c_nu", "c_phi",
                     "c_i", "c_e", "penalty_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not (0.0 < self.i_max <= 1.0):
            raise ValueError("i_max must be in (0, 1]")


@dataclass(frozen=True)
class Scenario:
    """Full problem definition: variant, parameters, costs, initial state,
    and horizon. Field names mirror the scenario-file schema."""

    variant: Variant
    params: EpidemicParams = field(default_factory=EpidemicParams)
    costs: CostParams = field(default_factory=CostParams)
    x0: tuple = (1.0, 0.0, 0.0)
    t0: float = 0.0
    T: float = 12.0
    name: str = ""

    def __post_init__(self):
        if self.t0 >= self.T:
            raise ValueError("t0 must be < T")
        if len(self.x0) != 3:
            raise ValueError("x0 must be (s, e, i)")
        s, e, i = self.x0
        for comp, val in zip("sei", (s, e, i)):
            if not (0.0 <= val <= 1.0):
                raise ValueError(f"x0.{comp} must be in [0, 1]")
        if self.variant.conservative and self.variant is not Variant.LQ1D:
            if s + e + i > 1.0 + 1e-12:
                raise ValueError("x0 components must satisfy s+e+i <= 1")
        if self.variant.is_border and self.params.delta == 0.0:
            raise ValueError("border_control requires delta > 0")
        if self.variant.has_immunity_loss and self.params.mu == 0.0:
            raise ValueError("immunity-loss variants require mu > 0")

    @property
    def uncontrolled_point(self) -> tuple:
        """No-intervention control: borders fully open for the border
        variant, everything else at zero."""
        return (0.0, 1.0) if self.variant.is_border else (0.0, 0.0)


def beta_at(params: EpidemicParams, t: float) -> float:
    """Transmission rate at time t (periodic with period 4 trimesters)."""
    return params.beta_schedule.at(t)


def nu_max_at(t: float) -> float:
    """Upper bound of the vaccination rate: none before trimester 4, then a
    one-trimester linear ramp-up to 1."""
    if t < 4.0:
        return 0.0
    if t < 5.0:
        return t - 4.0
    return 1.0


def u2_max_at(scn: Scenario, t: float) -> float:
    """Time-dependent upper bound of the second control component."""
    if scn.variant.is_border:
        return 1.0
    if scn.variant is Variant.LQ1D:
        return 0.0
    return nu_max_at(t)


def dynamics(scn: Scenario, x, u, t: float) -> np.ndarray:
    """Right-hand side (s', e', i') of the selected variant.

    Vaccine efficacy enters as nu -> p*nu in the dynamics only; the cost is
    charged on administered doses.
    """
    s, e, i = x
    u1, u2 = u
    v = scn.variant
    par = scn.params

    if v is Variant.LQ1D:
        return np.array([-u1, 0.0, 0.0])

    beta = beta_at(par, t)
    inc = beta * (1.0 - u1) * s * i  # incidence flow S -> E

    if v.is_border:
        d1, d2, d3, _ = par.deltas
        ds = -inc + u2 * d1
        de = inc - par.epsilon * e + u2 * d2
        di = par.epsilon * e - par.gamma * i + u2 * d3
        return np.array([ds, de, di])

    ds = -inc - par.p * u2 * s
    if v.has_immunity_loss:
        ds += par.mu * (1.0 - s - e - i)
    de = inc - par.epsilon * e
    di = par.epsilon * e - par.gamma * i
    return np.array([ds, de, di])


def running_cost(scn: Scenario, x, u, t: float) -> float:
    """Running cost rate for the selected variant."""
    s, e, i = x
    u1, u2 = u
    c = scn.costs
    v = scn.variant

    if v is Variant.LQ1D:
        return s * s + u1 * u1

    if v.is_border:
        # border costs scale with the approximate total population 1 + delta*tau*phi
        tau = t - scn.t0
        pop = 1.0 + scn.params.delta * tau * u2
        return ((c.c1 + c.c2) * i * i + 0.5 * c.c1 * (1.0 - i) * (1.0 - i)
                + c.c_lambda * u1 * u1 * pop
                + c.c_phi * (1.0 - u2) * (1.0 - u2) * pop)

    control_part = c.c_lambda * u1 * u1 + (c.c_nu0 + c.c_nu * s * s) * u2 * u2
    if v.is_constrained:
        viol = max(0.0, i - c.i_max)
        return control_part + c.penalty_weight * viol * viol
    return ((c.c1 + c.c2) * i * i + 0.5 * c.c1 * (1.0 - i) * (1.0 - i)
            + control_part)


def final_cost(scn: Scenario, x) -> float:
    """Terminal cost; zero for the border and state-constrained variants."""
    v = scn.variant
    if v in (Variant.BASIC, Variant.TEMPORARY_IMMUNITY):
        c = scn.costs
        _, e, i = x
        di = i - c.i_bar
        de = e - c.e_bar
        return c.c_i * di * di + c.c_e * de * de
    return 0.0


def grad_dynamics_state(scn: Scenario, x, u, t: float) -> np.ndarray:
    """3x3 Jacobian of the dynamics with respect to (s, e, i)."""
    s, e, i = x
    u1, u2 = u
    v = scn.variant
    par = scn.params
    J = np.zeros((3, 3))

    if v is Variant.LQ1D:
        return J

    beta = beta_at(par, t)
    bl = beta * (1.0 - u1)
    # incidence term appears in s' (negative) and e' (positive)
    J[0, 0] = -bl * i
    J[0, 2] = -bl * s
    J[1, 0] = bl * i
    J[1, 2] = bl * s
    J[1, 1] = -par.epsilon
    J[2, 1] = par.epsilon
    J[2, 2] = -par.gamma

    if v.is_border:
        return J

    J[0, 0] += -par.p * u2
    if v.has_immunity_loss:
        J[0, 0] += -par.mu
        J[0, 1] += -par.mu
        J[0, 2] += -par.mu
    return J


def grad_dynamics_control(scn: Scenario, x, u, t: float) -> np.ndarray:
    """3x2 Jacobian of the dynamics with respect to (u1, u2)."""
    s, e, i = x
    v = scn.variant
    par = scn.params
    G = np.zeros((3, 2))

    if v is Variant.LQ1D:
        G[0, 0] = -1.0
        return G

    beta = beta_at(par, t)
    bsi = beta * s * i
    G[0, 0] = bsi
    G[1, 0] = -bsi

    if v.is_border:
        d1, d2, d3, _ = par.deltas
        G[0, 1] = d1
        G[1, 1] = d2
        G[2, 1] = d3
    else:
        G[0, 1] = -par.p * s
    return G


def grad_cost_state(scn: Scenario, x, u, t: float) -> np.ndarray:
    """Gradient of the running cost with respect to (s, e, i)."""
    s, e, i = x
    u1, u2 = u
    c = scn.costs
    v = scn.variant

    if v is Variant.LQ1D:
        return np.array([2.0 * s, 0.0, 0.0])

    if v.is_border:
        di = 2.0 * (c.c1 + c.c2) * i - c.c1 * (1.0 - i)
        return np.array([0.0, 0.0, di])

    ds = 2.0 * c.c_nu * s * u2 * u2
    if v.is_constrained:
        viol = max(0.0, i - c.i_max)
        return np.array([ds, 0.0, 2.0 * c.penalty_weight * viol])
    di = 2.0 * (c.c1 + c.c2) * i - c.c1 * (1.0 - i)
    return np.array([ds, 0.0, di])


def grad_cost_control(scn: Scenario, x, u, t: float) -> np.ndarray:
    """Gradient of the running cost with respect to (u1, u2)."""
    s, e, i = x
    u1, u2 = u
    c = scn.costs
    v = scn.variant

    if v is Variant.LQ1D:
        return np.array([2.0 * u1, 0.0])

    if v.is_border:
        tau = t - scn.t0
        dtau = scn.params.delta * tau
        pop = 1.0 + dtau * u2
        d1 = 2.0 * c.c_lambda * u1 * pop
        # product rule: both cost terms carry the population factor
        d2 = (c.c_lambda * u1 * u1 * dtau
              - 2.0 * c.c_phi * (1.0 - u2) * pop
              + c.c_phi * (1.0 - u2) * (1.0 - u2) * dtau)
        return np.array([d1, d2])

    return np.array([2.0 * c.c_lambda * u1,
                     2.0 * (c.c_nu0 + c.c_nu * s * s) * u2])


def grad_final_cost(scn: Scenario, x) -> np.ndarray:
    """Gradient of the terminal cost with respect to (s, e, i)."""
    v = scn.variant
    if v in (Variant.BASIC, Variant.TEMPORARY_IMMUNITY):
        c = scn.costs
        _, e, i = x
        return np.array([0.0, 2.0 * c.c_e * (e - c.e_bar),
                         2.0 * c.c_i * (i - c.i_bar)])
    return np.zeros(3)


# ---------------------------------------------------------------------------
# presets

POPULATION = 58_983_122
_E0 = 3000.0 / POPULATION
_I0 = 1000.0 / POPULATION
_X0 = (1.0 - _E0 - _I0, _E0, _I0)

PRESET_NAMES = ("test1", "test2", "test3", "test4", "test5")

_PRESET_VARIANTS = {
    "test1": Variant.BASIC,
    "test2": Variant.TEMPORARY_IMMUNITY,
    "test3": Variant.BORDER_CONTROL,
    "test4": Variant.BASIC_CONSTRAINED,
    "test5": Variant.IMMUNITY_CONSTRAINED,
}


def preset(name: str) -> Scenario:
    """Build one of the five built-in scenarios (test1..test5)."""
    try:
        variant = _PRESET_VARIANTS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}"
        ) from None

    mu = 1.0 / 3.0 if variant.has_immunity_loss else 0.0
    delta = 0.75 if variant.is_border else 0.0
    params = EpidemicParams(mu=mu, delta=delta)
    return Scenario(variant=variant, params=params, x0=_X0, name=name)


def lq_fixture(T: float = 1.0) -> Scenario:
    """Scalar linear-quadratic fixture: y' = -u, cost y^2 + u^2, g = 0,
    y(0) = 1. Its optimal control u(t) = sinh(T-t)/cosh(T) lies strictly
    inside the [0, 0.9] box, so the descent solver can be validated against
    the closed-form Riccati solution."""
    return Scenario(variant=Variant.LQ1D, x0=(1.0, 0.0, 0.0),
                    t0=0.0, T=T, name="lq1d")
