"""Acceptance suite: the twelve shipping criteria, one test each.

The expensive artifacts (full-resolution combined solves of the five
built-in scenarios) are computed once per session, lazily, and shared by
every criterion that needs them. Reference cost values are the published
targets for these scenarios; measured values and tolerances are asserted
exactly as stated, so genuinely unreachable targets fail loudly rather
than silently.
"""

import numpy as np
import pytest

from seiropt import dal as dal_mod
from seiropt import models
from seiropt.checks import check_first_order, check_second_order
from seiropt.dal import DalConfig
from seiropt.hjb import solve_hjb
from seiropt.models import Variant
from seiropt.ode import ControlSchedule, TimeGrid, integrate_forward
from seiropt.pipeline import (Solution, evaluate_cost, solve_combined,
                              solve_uncontrolled, trajectory_deviation)

from conftest import ALL_VARIANTS, random_tiny_instance, scenario_for
from oracles import assert_rel_close, dp_oracle, random_simplex_state

PRESETS = ("test1", "test2", "test3", "test4", "test5")

# published reference costs for the five scenarios
TARGET_UNCONTROLLED = {
    "test1": 20.990463,
    "test2": 20.180178,
    "test3": 21.443343,
    "test4": 6.413498,
    "test5": 6.936510,
}
TARGET_COMBINED = {
    "test1": 20.521155,
    "test2": 19.865984,
    "test3": 19.977807,
    "test4": 0.296018,
    "test5": 0.333978,
}
TARGET_T3_COLD_CLOSED = 22.321380   # descent from fully closed borders
TARGET_T3_COLD_OPEN = 20.092728    # descent from fully open borders
TARGET_T5_COLD = 0.362150

_CACHE = {}


def _polish(scn, grid, controls):
    """Restarted descent to stationarity. Each restart resets the line
    search, which escapes the step-collapse plateau the penalty variants
    hit near their optimum."""
    histories = []
    res = None
    for eps in (1e-11, 1e-13, 1e-13):
        res = dal_mod.dal_solve(scn, grid, initial=controls,
                                cfg=DalConfig(eps=eps, max_iters=200_000))
        histories.append(res.cost_history)
        controls = res.controls
    sol = Solution(method="sl-dal", controls=res.controls,
                   trajectory=res.trajectory, cost=res.cost)
    return sol, histories


def _solve_preset(name):
    scn = models.preset(name)
    grid = TimeGrid.for_scenario(scn)
    uncontrolled = solve_uncontrolled(scn, grid)
    combined = solve_combined(scn, grid)
    polished, _ = _polish(scn, grid, combined.controls)
    return {
        "scn": scn,
        "grid": grid,
        "uncontrolled": uncontrolled,
        "combined": combined,
        "polished": polished,
        "sl_cost": combined.diagnostics["sl_cost"],
        "sl_trajectory": combined.diagnostics["sl_trajectory"],
    }


def _solve_cold(name, point):
    scn = models.preset(name)
    grid = TimeGrid.for_scenario(scn)
    initial = ControlSchedule.constant(grid, *point)
    return dal_mod.dal_solve(scn, grid, initial=initial)


@pytest.fixture(scope="session")
def bundle():
    """Lazy per-scenario artifact cache shared by all criteria."""

    def get(key):
        if key not in _CACHE:
            if key in PRESETS:
                _CACHE[key] = _solve_preset(key)
            elif key == "test3_cold_closed":
                _CACHE[key] = _solve_cold("test3", (0.0, 0.0))
            elif key == "test3_cold_open":
                _CACHE[key] = _solve_cold("test3", (0.0, 1.0))
            elif key == "test5_cold":
                _CACHE[key] = _solve_cold("test5", (0.0, 0.0))
            else:
                raise KeyError(key)
        return _CACHE[key]

    return get


def rel_err(value, target):
    return abs(value / target - 1.0)


# ---------------------------------------------------------------------------

def test_criterion_01_uncontrolled_costs(bundle):
    """Uncontrolled baseline cost within 2% of the reference, all five."""
    bad = []
    for name in PRESETS:
        got = bundle(name)["uncontrolled"].cost
        if rel_err(got, TARGET_UNCONTROLLED[name]) > 0.02:
            bad.append(f"{name}: J_U={got:.6f} vs {TARGET_UNCONTROLLED[name]}")
    assert not bad, "; ".join(bad)


def test_criterion_02_combined_costs(bundle):
    """Combined-pipeline cost within 2% of the reference at the default
    60-node grid and 30x30 control mesh; grid-only cost within 5% on the
    first scenario."""
    bad = []
    for name in PRESETS:
        got = bundle(name)["combined"].cost
        if rel_err(got, TARGET_COMBINED[name]) > 0.02:
            bad.append(f"{name}: J={got:.6f} vs {TARGET_COMBINED[name]}")
    sl1 = bundle("test1")["sl_cost"]
    if rel_err(sl1, TARGET_COMBINED["test1"]) > 0.05:
        bad.append(f"test1 grid-only: J_SL={sl1:.6f}")
    assert not bad, "; ".join(bad)


def test_criterion_03_border_descent_starts(bundle):
    """Cold descent from closed and from open borders lands on the two
    reference costs (1%); the warm-started run beats both strictly."""
    closed = bundle("test3_cold_closed").cost
    opened = bundle("test3_cold_open").cost
    combined = bundle("test3")["combined"].cost
    bad = []
    if rel_err(closed, TARGET_T3_COLD_CLOSED) > 0.01:
        bad.append(f"closed start: J={closed:.6f} vs {TARGET_T3_COLD_CLOSED}")
    if rel_err(opened, TARGET_T3_COLD_OPEN) > 0.01:
        bad.append(f"open start: J={opened:.6f} vs {TARGET_T3_COLD_OPEN}")
    if not (combined < closed and combined < opened):
        bad.append(f"combined J={combined:.6f} not strictly below "
                   f"{closed:.6f} and {opened:.6f}")
    assert not bad, "; ".join(bad)


def test_criterion_04_constrained_warm_start_advantage(bundle):
    """On the immunity-loss constrained scenario, cold descent and the
    combined pipeline land on their reference costs (2%) and the combined
    cost is strictly lower."""
    cold = bundle("test5_cold").cost
    combined = bundle("test5")["combined"].cost
    bad = []
    if rel_err(cold, TARGET_T5_COLD) > 0.02:
        bad.append(f"cold: J={cold:.6f} vs {TARGET_T5_COLD}")
    if rel_err(combined, TARGET_COMBINED["test5"]) > 0.02:
        bad.append(f"combined: J={combined:.6f} vs {TARGET_COMBINED['test5']}")
    if not combined < cold:
        bad.append(f"combined J={combined:.6f} not strictly below "
                   f"cold J={cold:.6f}")
    assert not bad, "; ".join(bad)


def test_criterion_05_cost_ordering(bundle):
    """J_combined <= J_grid <= J_uncontrolled (1e-10 slack), all five."""
    bad = []
    for name in PRESETS:
        b = bundle(name)
        j_c, j_sl, j_u = b["combined"].cost, b["sl_cost"], b["uncontrolled"].cost
        if not (j_c <= j_sl + 1e-10 and j_sl <= j_u + 1e-10):
            bad.append(f"{name}: {j_c:.6f} / {j_sl:.6f} / {j_u:.6f}")
    assert not bad, "; ".join(bad)


def test_criterion_06_infection_cap_respected(bundle):
    """Combined solutions of the constrained scenarios keep the infected
    share within 0.005 of the 0.13 cap at every node."""
    bad = []
    for name in ("test4", "test5"):
        peak = float(bundle(name)["combined"].trajectory.states[:, 2].max())
        if peak > 0.13 + 0.005:
            bad.append(f"{name}: max i = {peak:.6f}")
    assert not bad, "; ".join(bad)


def test_criterion_07_pipeline_agreement(bundle):
    """Grid-only and combined trajectories agree within 0.1 sup-norm per
    component, all five scenarios."""
    bad = []
    for name in PRESETS:
        b = bundle(name)
        dev = trajectory_deviation(b["sl_trajectory"],
                                   b["combined"].trajectory)
        if dev.max() > 0.1:
            bad.append(f"{name}: dev = ({dev[0]:.4f}, {dev[1]:.4f}, "
                       f"{dev[2]:.4f})")
    assert not bad, "; ".join(bad)


def test_criterion_08_exact_dynamic_programming():
    """On at least 20 randomized tiny instances, the grid solver equals the
    exhaustive min-plus enumeration exactly, values and policies both."""
    for seed in range(24):
        scn, spec, grid = random_tiny_instance(seed)
        vg, pol = solve_hjb(scn, spec, grid)
        values, u1_idx, u2_idx, active = dp_oracle(scn, spec, grid)
        assert np.array_equal(vg.values[:, active], values[:, active]), seed
        assert np.array_equal(pol.u1_idx[:, active], u1_idx[:, active]), seed
        assert np.array_equal(pol.u2_idx[:, active], u2_idx[:, active]), seed


def test_criterion_09_analytic_gradients(rng):
    """Every analytic derivative matches central finite differences to
    1e-6 relative accuracy at 100 random points per variant."""
    h = 1e-6
    for variant in ALL_VARIANTS:
        scn = scenario_for(variant)
        checked = 0
        while checked < 100:
            x = random_simplex_state(rng)
            if scn.variant.is_constrained \
                    and abs(x[2] - scn.costs.i_max) < 1e-3:
                continue  # hinge kink; finite differences are meaningless
            t = rng.uniform(scn.t0, scn.T)
            u = (rng.uniform(0.0, 0.9), rng.uniform(0.0, 1.0))
            _check_gradients_at(scn, x, u, t, h)
            checked += 1


def _check_gradients_at(scn, x, u, t, h):
    x = np.asarray(x, dtype=float)
    J = models.grad_dynamics_state(scn, x, u, t)
    G = models.grad_dynamics_control(scn, x, u, t)
    gx = models.grad_cost_state(scn, x, u, t)
    gu = models.grad_cost_control(scn, x, u, t)
    gf = models.grad_final_cost(scn, x)
    for k in range(3):
        dxp, dxm = x.copy(), x.copy()
        dxp[k] += h
        dxm[k] -= h
        fp = np.asarray(models.dynamics(scn, dxp, u, t))
        fm = np.asarray(models.dynamics(scn, dxm, u, t))
        for j in range(3):
            assert_rel_close(J[j, k], (fp[j] - fm[j]) / (2 * h),
                             rtol=1e-6, floor=1.0)
        assert_rel_close(gx[k],
                         (models.running_cost(scn, dxp, u, t)
                          - models.running_cost(scn, dxm, u, t)) / (2 * h),
                         rtol=1e-6, floor=1.0)
        assert_rel_close(gf[k],
                         (models.final_cost(scn, dxp)
                          - models.final_cost(scn, dxm)) / (2 * h),
                         rtol=1e-6, floor=1.0)
    for k in range(2):
        up, um = list(u), list(u)
        up[k] += h
        um[k] -= h
        fp = np.asarray(models.dynamics(scn, x, tuple(up), t))
        fm = np.asarray(models.dynamics(scn, x, tuple(um), t))
        for j in range(3):
            assert_rel_close(G[j, k], (fp[j] - fm[j]) / (2 * h),
                             rtol=1e-6, floor=1.0)
        assert_rel_close(gu[k],
                         (models.running_cost(scn, x, tuple(up), t)
                          - models.running_cost(scn, x, tuple(um), t))
                         / (2 * h),
                         rtol=1e-6, floor=1.0)


def test_criterion_10_optimality_conditions(bundle):
    """First-order variational inequalities hold at 1e-3 on every step of
    every polished solution (vaccination skipped while its cap is 0), and
    the second-order curvature check passes everywhere, including the
    trace/determinant pair on the border-flow scenario."""
    bad = []
    for name in PRESETS:
        b = bundle(name)
        r1 = check_first_order(b["scn"], b["polished"], tol=1e-3)
        if not r1.all_passed:
            bad.append(f"{name}: first order {r1.pass_fraction:.1%} "
                       f"(max violation {r1.max_violation:.2e})")
        r2 = check_second_order(b["scn"], b["polished"])
        if not r2.all_passed:
            bad.append(f"{name}: second order {r2.pass_fraction:.1%}")
        if name == "test3":
            assert r2.trace is not None and r2.det is not None
    assert not bad, "; ".join(bad)


def test_criterion_11_monotone_descent(bundle):
    """Every descent run recorded for criteria 2-4 has a strictly
    decreasing cost history."""
    histories = [("combined " + name,
                  bundle(name)["combined"].diagnostics["cost_history"])
                 for name in PRESETS]
    histories += [(key, bundle(key).cost_history)
                  for key in ("test3_cold_closed", "test3_cold_open",
                              "test5_cold")]
    bad = []
    for label, hist in histories:
        if hist.size < 2 or not np.all(np.diff(hist) < 0.0):
            bad.append(label)
    assert not bad, "; ".join(bad)


def test_criterion_12_scalar_benchmark_closed_form():
    """On the built-in scalar linear-quadratic problem at dt = 1e-3, the
    descent solution matches the closed form within 1e-3 everywhere."""
    scn = models.lq_fixture()
    grid = TimeGrid(scn.t0, scn.T, 1000)
    res = dal_mod.dal_solve(scn, grid)
    T = scn.T
    times = grid.times()
    u_star = np.sinh(T - times) / np.cosh(T)
    y_star = np.cosh(T - times) / np.cosh(T)
    u_err = np.abs(res.controls.u1[:-1] - u_star[:-1]).max()
    y_err = np.abs(res.trajectory.states[:, 0] - y_star).max()
    assert u_err <= 1e-3, u_err
    assert y_err <= 1e-3, y_err
