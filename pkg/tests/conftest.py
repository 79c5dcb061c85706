import dataclasses
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from seiropt import models
from seiropt.hjb import GridSpec
from seiropt.ode import TimeGrid


EPIDEMIC_VARIANTS = (
    models.Variant.BASIC,
    models.Variant.TEMPORARY_IMMUNITY,
    models.Variant.BORDER_CONTROL,
    models.Variant.BASIC_CONSTRAINED,
    models.Variant.IMMUNITY_CONSTRAINED,
)

ALL_VARIANTS = EPIDEMIC_VARIANTS + (models.Variant.LQ1D,)


@pytest.fixture
def rng():
    return np.random.default_rng(0x5E17)


@pytest.fixture(params=[v.name.lower() for v in EPIDEMIC_VARIANTS])
def epidemic_scenario(request):
    name = request.param.upper()
    return scenario_for(models.Variant[name])


PRESET_BY_VARIANT = {
    models.Variant.BASIC: "test1",
    models.Variant.TEMPORARY_IMMUNITY: "test2",
    models.Variant.BORDER_CONTROL: "test3",
    models.Variant.BASIC_CONSTRAINED: "test4",
    models.Variant.IMMUNITY_CONSTRAINED: "test5",
}


def scenario_for(variant, **overrides):
    """Preset scenario of the given variant, with field overrides."""
    if variant is models.Variant.LQ1D:
        scn = models.lq_fixture()
    else:
        scn = models.preset(PRESET_BY_VARIANT[variant])
    if overrides:
        scn = dataclasses.replace(scn, **overrides)
    return scn


def random_tiny_instance(seed):
    """Small random scenario + grids for exhaustive-oracle comparisons.

    Keeps horizons short and meshes coarse so the pure-python oracle stays
    cheap, while still hitting every variant, both beta regimes, and the
    time-dependent vaccination bound.
    """
    rng = np.random.default_rng(seed)
    variant = ALL_VARIANTS[int(rng.integers(len(ALL_VARIANTS)))]
    n_max = int(rng.integers(2, 5))
    dt = float(rng.uniform(0.02, 0.4))
    t0 = float(rng.choice([0.0, 1.5, 2.5, 4.3, 6.0]))
    if variant is models.Variant.LQ1D:
        x0 = (1.0, 0.0, 0.0)
    else:
        parts = rng.dirichlet((1.0, 1.0, 1.0, 1.0))
        x0 = (float(parts[0]), float(parts[1]), float(parts[2]))
    scn = scenario_for(variant, x0=x0, t0=t0, T=t0 + n_max * dt)
    nx = int(rng.integers(3, 6))
    m1 = int(rng.integers(2, 4))
    m2 = int(rng.integers(2, 4))
    spec = GridSpec(nodes_per_axis=nx, control_mesh=(m1, m2))
    grid = TimeGrid(t0=scn.t0, T=scn.T, n_max=n_max)
    return scn, spec, grid
