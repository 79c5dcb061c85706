"""Semi-Lagrangian solver for the dynamic-programming (HJB) equation.

Backward recursion on a uniform grid over the state cube [0,1]^3:

    V^{n_max}(x) = g(x)
    V^n(x)     = min_a [ V^{n+1}(x + dt f(x,a,t_n)) + dt l(x,a,t_n) ]

with trilinear interpolation of V^{n+1} at the Euler foot (clamped to the
cube) and the minimum taken over a finite control mesh. The minimizing mesh
index per node is kept as a feedback policy; optimal trajectories are
rebuilt by re-minimizing at the trajectory point at every step.
"""

from __future__ import annotations

import struct
import sys
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import models
from ._kernels import get_backend, pack, u2_bounds
from .models import LAMBDA_MAX, Scenario, Variant
from .ode import ControlSchedule, TimeGrid, Trajectory

__all__ = [
    "GridSpec",
    "ValueGrid",
    "FeedbackPolicy",
    "ControlChoice",
    "HjbError",
    "solve_hjb",
    "interpolate",
    "synthesize_feedback",
    "reconstruct_trajectory",
    "dump_value",
    "load_value",
]

ACTIVE_MARGIN_CELLS = 2  # simplex mask keeps s+e+i <= 1 + 2*dx


class HjbError(RuntimeError):
    """Solver produced a non-finite value; carries the slice and node."""

    def __init__(self, slice_index: int, node_index: int):
        self.slice_index = slice_index
        self.node_index = node_index
        super().__init__(
            f"non-finite value at time slice {slice_index}, node {node_index}"
        )


@dataclass(frozen=True)
class GridSpec:
    """Spatial grid over [0,1]^3 plus the control-mesh resolution.

    nodes_per_axis nodes per state axis (spacing 1/(nodes_per_axis-1));
    control_mesh = (m1, m2) mesh points on the two control axes. The u1 mesh
    spans [0, 0.9]; the u2 mesh spans [0, u2_max(t_n)], rescaled per slice.
    """

    nodes_per_axis: int = 60
    control_mesh: tuple = (30, 30)

    def __post_init__(self):
        if self.nodes_per_axis < 2:
            raise ValueError("nodes_per_axis must be >= 2")
        if len(self.control_mesh) != 2 or any(m < 1 for m in self.control_mesh):
            raise ValueError("control_mesh must be two counts >= 1")

    @property
    def dx(self) -> float:
        return 1.0 / (self.nodes_per_axis - 1)

    @property
    def n_nodes(self) -> int:
        return self.nodes_per_axis ** 3

    def u1_mesh(self) -> np.ndarray:
        return np.linspace(0.0, LAMBDA_MAX, self.control_mesh[0])

    def u2_fracs(self) -> np.ndarray:
        """u2 mesh as fractions of the per-slice bound u2_max(t_n)."""
        return np.linspace(0.0, 1.0, self.control_mesh[1])


def node_axes(nx: int):
    """Per-node integer coordinates (ix, iy, iz) in flat x-fastest order."""
    idx = np.arange(nx ** 3, dtype=np.int64)
    return idx % nx, (idx // nx) % nx, idx // (nx * nx)


@dataclass
class ValueGrid:
    """Value function on all time slices. values has shape
    (n_max+1, nodes_per_axis^3), x-fastest within a slice; inactive nodes
    keep their terminal-cost initialization."""

    spec: GridSpec
    grid: TimeGrid
    values: np.ndarray
    active_mask: np.ndarray

    @property
    def active_fraction(self) -> float:
        return float(np.count_nonzero(self.active_mask)) / self.active_mask.size


@dataclass
class FeedbackPolicy:
    """Minimizing control-mesh indices per slice and node, shape
    (n_max, nodes_per_axis^3) each, dtype uint16; meaningful only at active
    nodes (inactive nodes hold (0, 0))."""

    spec: GridSpec
    grid: TimeGrid
    u1_idx: np.ndarray
    u2_idx: np.ndarray


class ControlChoice(NamedTuple):
    """Synthesized feedback control: values, mesh indices, objective value."""

    u1: float
    u2: float
    j1: int
    j2: int
    value: float


def active_mask_for(scn: Scenario, spec: GridSpec) -> np.ndarray:
    """Computable-region mask: s+e+i <= 1 + 2*dx for the conservative
    epidemic variants, the full cube for border flow and the LQ fixture."""
    nx = spec.nodes_per_axis
    if scn.variant.is_border or scn.variant is Variant.LQ1D:
        return np.ones(nx ** 3, dtype=bool)
    ax, ay, az = node_axes(nx)
    dx = spec.dx
    return (ax * dx + ay * dx + az * dx) <= 1.0 + ACTIVE_MARGIN_CELLS * dx


def terminal_values(scn: Scenario, spec: GridSpec) -> np.ndarray:
    """g evaluated at every node, mirroring models.final_cost node-wise."""
    nx = spec.nodes_per_axis
    if scn.variant in (Variant.BASIC, Variant.TEMPORARY_IMMUNITY):
        _, ay, az = node_axes(nx)
        dx = spec.dx
        e = ay * dx
        i = az * dx
        c = scn.costs
        di = i - c.i_bar
        de = e - c.e_bar
        return c.c_i * di * di + c.c_e * de * de
    return np.zeros(nx ** 3)


def solve_hjb(scn: Scenario, spec: GridSpec, grid: TimeGrid,
              backend: str | None = None):
    """Run the backward sweep; returns (ValueGrid, FeedbackPolicy).

    Ties in the control scan break to the lowest (u1-major) mesh index, so
    results are deterministic across runs and thread counts.
    """
    if not (grid.t0 == scn.t0 and grid.T == scn.T):
        raise ValueError("time grid does not span the scenario horizon")
    bk = get_backend(backend)
    pk = pack(scn)
    nx = spec.nodes_per_axis
    n_max = grid.n_max

    mask = active_mask_for(scn, spec)
    active_idx = np.nonzero(mask)[0].astype(np.int64)
    gvals = terminal_values(scn, spec)

    values = np.empty((n_max + 1, nx ** 3))
    values[:] = gvals  # inactive nodes keep g at every slice
    p1 = np.zeros((n_max, nx ** 3), dtype=np.uint16)
    p2 = np.zeros((n_max, nx ** 3), dtype=np.uint16)

    bk.hjb_solve(pk.code, pk.phys, pk.cw,
                 pk.beta_lo, pk.beta_hi, pk.beta_val, pk.beta_default, pk.t0,
                 nx, active_idx, values, p1, p2,
                 spec.u1_mesh(), spec.u2_fracs(),
                 u2_bounds(scn, grid), grid.dt, n_max)

    if not np.isfinite(values[:, active_idx]).all():
        sl, k = np.argwhere(~np.isfinite(values))[0]
        raise HjbError(int(sl), int(k))
    return (ValueGrid(spec, grid, values, mask),
            FeedbackPolicy(spec, grid, p1, p2))


def interpolate(vg: ValueGrid, n: int, x) -> float:
    """Trilinear interpolation of slice n at point x (clamped to the cube)."""
    from ._kernels import numpy_backend

    s, e, i = (float(v) for v in x)
    return float(numpy_backend.interp3(vg.values[n], vg.spec.nodes_per_axis,
                                       s, e, i))


def synthesize_feedback(scn: Scenario, vg: ValueGrid, policy: FeedbackPolicy,
                        x, n: int, backend: str | None = None) -> ControlChoice:
    """Feedback control at state x and slice n < n_max.

    Re-minimizes V^{n+1}(x + dt f) + dt l over the control mesh at the exact
    query point (the stored policy is only consulted implicitly: at grid
    nodes the same scan reproduces the stored indices).
    """
    del policy  # synthesis re-minimizes; kept in the signature for symmetry
    grid = vg.grid
    if not 0 <= n < grid.n_max:
        raise ValueError("slice index must satisfy 0 <= n < n_max")
    bk = get_backend(backend)
    pk = pack(scn)
    spec = vg.spec
    t = grid.t(n)
    u2m = models.u2_max_at(scn, t)
    s, e, i = (float(v) for v in x)
    best, j1, j2 = bk.synth_point(
        pk.code, pk.phys, pk.cw,
        pk.beta_lo, pk.beta_hi, pk.beta_val, pk.beta_default, pk.t0,
        vg.values[n + 1], spec.nodes_per_axis, s, e, i, t,
        spec.u1_mesh(), spec.u2_fracs(), u2m, grid.dt)
    u1 = float(spec.u1_mesh()[j1])
    u2 = 0.0 if u2m == 0.0 else float(u2m * spec.u2_fracs()[j2])
    return ControlChoice(u1, u2, int(j1), int(j2), float(best))


def reconstruct_trajectory(scn: Scenario, vg: ValueGrid,
                           policy: FeedbackPolicy,
                           grid: TimeGrid | None = None,
                           backend: str | None = None):
    """Forward Euler from x0 with per-step feedback synthesis.

    Returns a pipeline.Solution tagged "sl" carrying the trajectory, the
    discrete open-loop schedule alpha*(t_n) = a*(y_n, t_n), and the
    rectangle-rule cost of that pair. The Euler step itself is unclamped;
    clamping only happens inside the interpolation.
    """
    from .pipeline import Solution, evaluate_cost

    grid = vg.grid if grid is None else grid
    if grid != vg.grid:
        raise ValueError("grid mismatch with the value function")
    bk = get_backend(backend)
    pk = pack(scn)
    spec = vg.spec
    nx = spec.nodes_per_axis
    n_max = grid.n_max
    dt = grid.dt
    u1_mesh = spec.u1_mesh()
    u2_fracs = spec.u2_fracs()
    u2b = u2_bounds(scn, grid)

    states = np.empty((n_max + 1, 3))
    states[0] = scn.x0
    u1 = np.zeros(n_max + 1)
    u2 = np.zeros(n_max + 1)
    for n in range(n_max):
        y = states[n]
        if not np.isfinite(y).all():
            raise HjbError(n, -1)
        t = grid.t(n)
        u2m = u2b[n]
        _, j1, j2 = bk.synth_point(
            pk.code, pk.phys, pk.cw,
            pk.beta_lo, pk.beta_hi, pk.beta_val, pk.beta_default, pk.t0,
            vg.values[n + 1], nx, float(y[0]), float(y[1]), float(y[2]), t,
            u1_mesh, u2_fracs, u2m, dt)
        a1 = float(u1_mesh[j1])
        a2 = 0.0 if u2m == 0.0 else float(u2m * u2_fracs[j2])
        u1[n] = a1
        u2[n] = a2
        states[n + 1] = y + dt * models.dynamics(scn, y, (a1, a2), t)
    u1[n_max] = u1[n_max - 1]
    u2[n_max] = u2[n_max - 1]

    traj = Trajectory(grid, states)
    controls = ControlSchedule(grid, u1, u2)
    cost = evaluate_cost(scn, traj, controls)
    return Solution(method="sl", controls=controls, trajectory=traj,
                    cost=cost,
                    diagnostics={"nodes_per_axis": nx,
                                 "control_mesh": tuple(spec.control_mesh)})


# ---------------------------------------------------------------------------
# binary persistence

MAGIC = b"HJBV"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")


def _write_array(f, arr, dtype):
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if sys.byteorder == "big":
        arr = arr.byteswap()
    arr.tofile(f)


def _read_array(f, dtype, count):
    arr = np.fromfile(f, dtype=dtype, count=count)
    if arr.size != count:
        raise ValueError("value file truncated")
    if sys.byteorder == "big":
        arr = arr.byteswap()
    return arr


def dump_value(vg: ValueGrid, policy: FeedbackPolicy, path) -> None:
    """Write the little-endian binary dump: HJBV header, n_max+1 value
    slices (float64, x-fastest), then n_max policy slices as (u1, u2) index
    pairs (uint16). The control-mesh size and active mask are not recorded."""
    grid = vg.grid
    n_max = grid.n_max
    nx = vg.spec.nodes_per_axis
    pol = np.empty((n_max, nx ** 3, 2), dtype=np.uint16)
    pol[:, :, 0] = policy.u1_idx
    pol[:, :, 1] = policy.u2_idx
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, nx, n_max,
                             grid.t0, grid.T))
        _write_array(f, vg.values, np.float64)
        _write_array(f, pol, np.uint16)


def load_value(path, control_mesh: tuple = (30, 30)):
    """Read a dump back into (ValueGrid, FeedbackPolicy).

    The file does not store the control-mesh resolution or the active mask:
    pass the mesh the file was produced with; the mask comes back all-true.
    """
    with open(path, "rb") as f:
        header = f.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError("value file truncated")
        magic, version, nx, n_max, t0, T = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError("not a value-function dump (bad magic)")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported dump version {version}")
        n_nodes = nx ** 3
        values = _read_array(f, np.float64, (n_max + 1) * n_nodes)
        pol = _read_array(f, np.uint16, n_max * n_nodes * 2)
    values = values.reshape(n_max + 1, n_nodes)
    pol = pol.reshape(n_max, n_nodes, 2)
    spec = GridSpec(nodes_per_axis=int(nx), control_mesh=tuple(control_mesh))
    grid = TimeGrid(t0=t0, T=T, n_max=int(n_max))
    vg = ValueGrid(spec, grid, values, np.ones(n_nodes, dtype=bool))
    policy = FeedbackPolicy(spec, grid, np.ascontiguousarray(pol[:, :, 0]),
                            np.ascontiguousarray(pol[:, :, 1]))
    return vg, policy
