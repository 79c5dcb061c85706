"""Backend selection and scenario packing for the compute kernels.

Two interchangeable backends implement the hot loops (HJB backward sweep,
descent iteration, forward/adjoint sweeps):

* ``numba_backend``: @njit-compiled kernels, the default when numba imports.
* ``numpy_backend``: pure numpy/python fallback with identical semantics.

``SEIROPT_BACKEND`` selects explicitly ("numba" or "numpy"); anything else,
or unset, means auto. ``SEIROPT_WORKERS`` caps the numba thread count.
"""

from __future__ import annotations

import os

import numpy as np

from .. import models
from ..models import Scenario, Variant, VARIANT_CODES

BACKEND_ENV = "SEIROPT_BACKEND"
WORKERS_ENV = "SEIROPT_WORKERS"

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def backend_name(override: str | None = None) -> str:
    name = (override or os.environ.get(BACKEND_ENV, "auto")).lower()
    if name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        return "numba"
    if name == "numpy":
        return "numpy"
    return "numba" if HAS_NUMBA else "numpy"


def get_backend(override: str | None = None):
    name = backend_name(override)
    if name == "numba":
        _apply_worker_cap()
        from . import numba_backend

        return numba_backend
    from . import numpy_backend

    return numpy_backend


def _apply_worker_cap():
    workers = os.environ.get(WORKERS_ENV)
    if workers:
        import numba

        n = max(1, int(workers))
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


class PackedScenario:
    """Scenario flattened into plain arrays consumable by compiled kernels."""

    __slots__ = ("code", "phys", "cw", "beta_lo", "beta_hi", "beta_val",
                 "beta_default", "t0", "x0")

    def __init__(self, scn: Scenario):
        par = scn.params
        c = scn.costs
        d1, d2, d3, d4 = par.deltas
        self.code = VARIANT_CODES[scn.variant]
        self.phys = np.array(
            [par.epsilon, par.gamma, par.mu, par.p, par.delta, d1, d2, d3, d4],
            dtype=np.float64,
        )
        # delta rides along at cw[12] because the border running cost needs it
        self.cw = np.array(
            [c.c1, c.c2, c.c_lambda, c.c_nu0, c.c_nu, c.c_phi,
             c.c_i, c.c_e, c.i_bar, c.e_bar, c.penalty_weight, c.i_max,
             par.delta],
            dtype=np.float64,
        )
        segs = par.beta_schedule.segments
        self.beta_lo = np.array([s[0] for s in segs], dtype=np.float64)
        self.beta_hi = np.array([s[1] for s in segs], dtype=np.float64)
        self.beta_val = np.array([s[2] for s in segs], dtype=np.float64)
        self.beta_default = float(par.beta_schedule.default)
        self.t0 = float(scn.t0)
        self.x0 = np.array(scn.x0, dtype=np.float64)


def pack(scn: Scenario) -> PackedScenario:
    return PackedScenario(scn)


def u2_bounds(scn: Scenario, grid) -> np.ndarray:
    """Per-node upper bound of the second control component."""
    return np.array([models.u2_max_at(scn, grid.t(n))
                     for n in range(grid.n_max + 1)], dtype=np.float64)
