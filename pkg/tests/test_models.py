"""Model definitions: rates, dynamics, costs, gradients, validation."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seiropt import models
from seiropt.models import Variant

from conftest import EPIDEMIC_VARIANTS, scenario_for
from oracles import (assert_rel_close, fd_gradient, fd_jacobian,
                     random_control, random_simplex_state)


unit = st.floats(0.0, 1.0, allow_nan=False)
times = st.floats(0.0, 12.0, allow_nan=False)


# ---------------------------------------------------------------------------
# schedules

def test_beta_seasonal_values():
    par = models.EpidemicParams()
    assert models.beta_at(par, 0.0) == 16.0
    assert models.beta_at(par, 2.5) == 4.0
    assert models.beta_at(par, 6.5) == 4.0  # periodic: 6.5 mod 4 = 2.5


def test_beta_closed_interval_endpoints():
    par = models.EpidemicParams()
    assert models.beta_at(par, 2.0) == 4.0
    assert models.beta_at(par, 3.0) == 4.0
    assert models.beta_at(par, 1.999) == 16.0
    assert models.beta_at(par, 3.001) == 16.0


@given(st.floats(0.0, 100.0, allow_nan=False))
def test_beta_pure_and_periodic(t):
    par = models.EpidemicParams()
    assert models.beta_at(par, t) == models.beta_at(par, t)
    # shift by a whole year; quantize t so t+4 is exact in floating point
    tq = round(t * 16.0) / 16.0
    assert models.beta_at(par, tq) == models.beta_at(par, tq + 4.0)


def test_custom_beta_first_match_wins():
    sched = models.BetaSchedule(segments=((0.0, 2.0, 5.0), (1.0, 3.0, 7.0)),
                                default=11.0)
    assert sched.at(1.5) == 5.0
    assert sched.at(2.5) == 7.0
    assert sched.at(3.5) == 11.0


def test_nu_max_ramp():
    assert models.nu_max_at(3.0) == 0.0
    assert models.nu_max_at(4.5) == 0.5
    assert models.nu_max_at(7.0) == 1.0
    assert models.nu_max_at(4.0) == 0.0
    assert models.nu_max_at(5.0) == 1.0


def test_u2_bound_by_variant():
    border = scenario_for(Variant.BORDER_CONTROL)
    basic = scenario_for(Variant.BASIC)
    assert models.u2_max_at(border, 0.0) == 1.0
    assert models.u2_max_at(border, 7.0) == 1.0
    assert models.u2_max_at(basic, 3.0) == 0.0
    assert models.u2_max_at(basic, 4.5) == 0.5
    assert models.u2_max_at(models.lq_fixture(), 0.5) == 0.0


# ---------------------------------------------------------------------------
# dynamics

def test_disease_free_equilibrium():
    scn = scenario_for(Variant.BASIC)
    f = models.dynamics(scn, (1.0, 0.0, 0.0), (0.0, 0.0), 0.0)
    assert np.array_equal(f, np.zeros(3))


def test_basic_dynamics_example():
    scn = scenario_for(Variant.BASIC)
    f = models.dynamics(scn, (0.9, 0.0, 0.05), (0.0, 0.0), 0.0)
    np.testing.assert_allclose(f, [-0.72, 0.72, -0.2], rtol=0, atol=1e-12)


def test_border_inflow_example():
    scn = scenario_for(Variant.BORDER_CONTROL)
    f = models.dynamics(scn, (1.0, 0.0, 0.0), (0.0, 1.0), 0.0)
    np.testing.assert_allclose(f, [0.375, 0.0075, 0.00375],
                               rtol=0, atol=1e-12)


def test_immunity_loss_feeds_susceptibles():
    scn = scenario_for(Variant.TEMPORARY_IMMUNITY)
    f = models.dynamics(scn, (0.5, 0.1, 0.1), (0.0, 0.0), 2.5)
    base = models.dynamics(scenario_for(Variant.BASIC),
                           (0.5, 0.1, 0.1), (0.0, 0.0), 2.5)
    assert f[0] == pytest.approx(base[0] + (1.0 / 3.0) * 0.3, abs=1e-12)
    assert f[1] == base[1] and f[2] == base[2]


@given(unit, unit, unit, unit, unit, times)
def test_basic_sum_identity(s, e, i, u1f, u2, t):
    # s' + e' + i' = -gamma*i - p*nu*s for the basic variant
    scn = scenario_for(Variant.BASIC)
    u = (u1f * models.LAMBDA_MAX, u2)
    f = models.dynamics(scn, (s, e, i), u, t)
    expect = -scn.params.gamma * i - scn.params.p * u[1] * s
    assert abs(f.sum() - expect) < 1e-12


@given(unit, unit, unit, unit, times)
def test_border_population_identity(s, e, i, phi, t):
    # d/dt(s+e+i+r) = delta*phi once the recovered inflow delta_4 is added
    scn = scenario_for(Variant.BORDER_CONTROL)
    f = models.dynamics(scn, (s, e, i), (0.0, phi), t)
    r_dot = scn.params.gamma * i + phi * scn.params.deltas[3]
    assert abs(f.sum() + r_dot - scn.params.delta * phi) < 1e-12


def test_lq_dynamics():
    scn = models.lq_fixture()
    f = models.dynamics(scn, (0.7, 0.0, 0.0), (0.25, 0.0), 0.3)
    assert np.array_equal(f, [-0.25, 0.0, 0.0])


# ---------------------------------------------------------------------------
# costs

def test_running_cost_examples():
    t1 = scenario_for(Variant.BASIC)
    assert models.running_cost(t1, (1.0, 0.0, 0.0), (0.0, 0.0), 0.0) \
        == pytest.approx(1.75, abs=1e-15)
    assert models.running_cost(t1, (1.0, 0.0, 0.0), (0.9, 0.0), 0.0) \
        == pytest.approx(2.0335, abs=1e-12)
    t3 = scenario_for(Variant.BORDER_CONTROL)
    assert models.running_cost(t3, (1.0, 0.0, 0.0), (0.0, 1.0), 0.0) \
        == pytest.approx(1.75, abs=1e-15)


def test_constrained_cost_drops_infection_terms():
    t4 = scenario_for(Variant.BASIC_CONSTRAINED)
    # below the ICU threshold only the control effort is charged
    assert models.running_cost(t4, (0.5, 0.1, 0.1), (0.0, 0.0), 0.0) == 0.0
    lam = 0.3
    expect = t4.costs.c_lambda * lam * lam
    assert models.running_cost(t4, (0.5, 0.1, 0.1), (lam, 0.0), 0.0) \
        == pytest.approx(expect, abs=1e-15)


def test_constrained_penalty_hinge():
    t4 = scenario_for(Variant.BASIC_CONSTRAINED)
    at = models.running_cost(t4, (0.5, 0.1, 0.13), (0.0, 0.0), 0.0)
    below = models.running_cost(t4, (0.5, 0.1, 0.1299), (0.0, 0.0), 0.0)
    above = models.running_cost(t4, (0.5, 0.1, 0.14), (0.0, 0.0), 0.0)
    assert at == 0.0 and below == 0.0
    assert above == pytest.approx(1e3 * 0.01 ** 2, rel=1e-12)


def test_border_cost_population_growth():
    # control terms scale with the approximate population 1 + delta*tau*phi
    t3 = scenario_for(Variant.BORDER_CONTROL)
    lam, phi, tau = 0.5, 0.5, 8.0
    pop = 1.0 + 0.75 * tau * phi
    expect = ((t3.costs.c1 + t3.costs.c2) * 0.01
              + 0.5 * t3.costs.c1 * 0.81
              + t3.costs.c_lambda * lam * lam * pop
              + t3.costs.c_phi * (1.0 - phi) ** 2 * pop)
    got = models.running_cost(t3, (0.5, 0.2, 0.1), (lam, phi), tau)
    assert got == pytest.approx(expect, rel=1e-13)


def test_final_cost_examples():
    t1 = scenario_for(Variant.BASIC)
    assert models.final_cost(t1, (0.5, 0.0, 0.0)) == 0.0
    assert models.final_cost(t1, (0.5, 0.0, 0.1)) == pytest.approx(0.35,
                                                                   abs=1e-12)
    t3 = scenario_for(Variant.BORDER_CONTROL)
    assert models.final_cost(t3, (0.2, 0.3, 0.4)) == 0.0
    t4 = scenario_for(Variant.BASIC_CONSTRAINED)
    assert models.final_cost(t4, (0.2, 0.3, 0.4)) == 0.0


@given(unit, unit, unit, unit, unit, times)
def test_costs_nonnegative(s, e, i, u1f, u2f, t):
    for variant in EPIDEMIC_VARIANTS:
        scn = scenario_for(variant)
        u2m = models.u2_max_at(scn, t)
        u = (u1f * models.LAMBDA_MAX, u2f * u2m)
        assert models.running_cost(scn, (s, e, i), u, t) >= 0.0
        assert models.final_cost(scn, (s, e, i)) >= 0.0


# ---------------------------------------------------------------------------
# gradients

def test_gradient_examples():
    t1 = scenario_for(Variant.BASIC)
    G = models.grad_dynamics_control(t1, (0.9, 0.0, 0.05), (0.0, 0.0), 0.0)
    assert G[0, 0] == pytest.approx(0.72, abs=1e-12)  # d s'/d lambda = beta*s*i
    gc = models.grad_cost_control(t1, (0.9, 0.0, 0.05), (0.0, 0.0), 0.0)
    assert gc[1] == 0.0  # quadratic in nu vanishes at nu = 0
    t2 = scenario_for(Variant.TEMPORARY_IMMUNITY)
    J = models.grad_dynamics_state(t2, (0.5, 0.1, 0.1), (0.2, 0.0), 1.0)
    assert J[0, 1] == pytest.approx(-1.0 / 3.0, abs=1e-12)  # d s'/d e = -mu


@pytest.mark.parametrize("variant", [v.name.lower() for v in EPIDEMIC_VARIANTS]
                         + ["lq1d"])
def test_gradients_match_finite_differences(variant):
    scn = scenario_for(Variant(variant))
    rng = np.random.default_rng(hash(variant) % 2 ** 32)
    for _ in range(25):
        t = float(rng.uniform(scn.t0, scn.T))
        x = np.array(random_simplex_state(rng))
        if scn.variant.is_constrained:
            # keep clear of the hinge kink at i = i_max
            if abs(x[2] - scn.costs.i_max) < 1e-3:
                x[2] += 2e-3
        u = np.array(random_control(scn, rng, t, margin=0.05))
        if models.u2_max_at(scn, t) == 0.0:
            u[1] = 0.0

        assert_rel_close(
            models.grad_dynamics_state(scn, x, u, t),
            fd_jacobian(lambda y: models.dynamics(scn, y, u, t), x))
        assert_rel_close(
            models.grad_dynamics_control(scn, x, u, t),
            fd_jacobian(lambda w: models.dynamics(scn, x, w, t), u))
        assert_rel_close(
            models.grad_cost_state(scn, x, u, t),
            fd_gradient(lambda y: models.running_cost(scn, y, u, t), x))
        assert_rel_close(
            models.grad_cost_control(scn, x, u, t),
            fd_gradient(lambda w: models.running_cost(scn, x, w, t), u))
        assert_rel_close(
            models.grad_final_cost(scn, x),
            fd_gradient(lambda y: models.final_cost(scn, y), x))


# ---------------------------------------------------------------------------
# presets and validation

def test_presets_cover_paper_scenarios():
    n = models.POPULATION
    for name, variant in zip(models.PRESET_NAMES,
                             EPIDEMIC_VARIANTS):
        scn = models.preset(name)
        assert scn.variant is variant
        assert scn.t0 == 0.0 and scn.T == 12.0
        np.testing.assert_allclose(
            scn.x0, [1.0 - 4000.0 / n, 3000.0 / n, 1000.0 / n], rtol=1e-15)
    t2 = models.preset("test2")
    assert t2.params.mu == pytest.approx(1.0 / 3.0)
    t3 = models.preset("test3")
    assert t3.params.delta == 0.75
    np.testing.assert_allclose(t3.params.deltas,
                               [0.375, 0.0075, 0.00375, 0.363750], atol=1e-12)


def test_preset_unknown_name():
    with pytest.raises(ValueError, match="unknown preset"):
        models.preset("test9")


def test_uncontrolled_point_by_variant():
    assert scenario_for(Variant.BASIC).uncontrolled_point == (0.0, 0.0)
    assert scenario_for(Variant.BORDER_CONTROL).uncontrolled_point == (0.0, 1.0)


@pytest.mark.parametrize("bad", [
    dict(epsilon=0.0), dict(gamma=-1.0), dict(mu=-0.5), dict(p=0.0),
    dict(p=1.5), dict(delta=-1.0),
    dict(delta_fracs=(0.5, 0.5)), dict(delta_fracs=(0.5, 0.3, 0.1, 0.2)),
])
def test_epidemic_params_validation(bad):
    with pytest.raises(ValueError):
        models.EpidemicParams(**bad)


@pytest.mark.parametrize("bad", [
    dict(c1=-1.0), dict(penalty_weight=-2.0), dict(i_max=0.0),
    dict(i_max=1.5),
])
def test_cost_params_validation(bad):
    with pytest.raises(ValueError):
        models.CostParams(**bad)


def test_scenario_validation():
    t1 = models.preset("test1")
    with pytest.raises(ValueError, match="t0"):
        dataclasses.replace(t1, t0=12.0)
    with pytest.raises(ValueError, match="s\\+e\\+i"):
        dataclasses.replace(t1, x0=(0.8, 0.4, 0.2))
    with pytest.raises(ValueError, match="in \\[0, 1\\]"):
        dataclasses.replace(t1, x0=(-0.1, 0.0, 0.0))
    with pytest.raises(ValueError, match="delta"):
        dataclasses.replace(models.preset("test3"),
                            params=models.EpidemicParams(delta=0.0))
    with pytest.raises(ValueError, match="mu"):
        dataclasses.replace(models.preset("test2"),
                            params=models.EpidemicParams(mu=0.0))
    # the border variant is exempt from the simplex constraint
    t3 = models.preset("test3")
    dataclasses.replace(t3, x0=(0.9, 0.9, 0.1))


def test_beta_schedule_validation():
    with pytest.raises(ValueError):
        models.BetaSchedule(segments=((-1.0, 2.0, 4.0),))
    with pytest.raises(ValueError):
        models.BetaSchedule(segments=((0.0, 1.0, -4.0),))
    with pytest.raises(ValueError):
        models.BetaSchedule(default=0.0)
