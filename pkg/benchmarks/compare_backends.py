"""Timing comparison between the compiled (numba) and pure-numpy backends.

Both backends run the same pinned workload through the public pipeline
entry points, and their outputs are compared bit for bit before reporting,
so the table below is a like-for-like measurement:

    python3 benchmarks/compare_backends.py
    python3 benchmarks/compare_backends.py --grid 30 --mesh 15 --dal-iters 500

The numba backend JIT-compiles on first use; a small warm-up solve runs
outside the timed region.
"""

import argparse
import time

import numpy as np

from seiropt import models
from seiropt._kernels import HAS_NUMBA
from seiropt.dal import DalConfig
from seiropt.hjb import GridSpec
from seiropt.ode import TimeGrid
from seiropt.pipeline import solve_dal, solve_sl


def timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="test1")
    ap.add_argument("--grid", type=int, default=20,
                    help="state-grid nodes per axis (default 20)")
    ap.add_argument("--mesh", type=int, default=10,
                    help="control-mesh points per control (default 10)")
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--dal-iters", type=int, default=200,
                    help="fixed descent iteration budget (default 200)")
    args = ap.parse_args()

    if not HAS_NUMBA:
        print("numba is not importable; nothing to compare against")
        return 1

    scn = models.preset(args.scenario)
    grid = TimeGrid.for_scenario(scn, args.dt)
    spec = GridSpec(nodes_per_axis=args.grid,
                    control_mesh=(args.mesh, args.mesh))
    # run every descent iteration to the cap so both backends do equal work
    cfg = DalConfig(eps=1e-300, max_iters=args.dal_iters)

    print("warming up the compiled backend (JIT) ...")
    tiny = GridSpec(nodes_per_axis=4, control_mesh=(2, 2))
    solve_sl(scn, grid, tiny, backend="numba")
    solve_dal(scn, grid, cfg=DalConfig(eps=1e-300, max_iters=2),
              backend="numba")

    rows = []
    checks = []

    label = f"hjb {args.grid}^3 grid, {args.mesh}x{args.mesh} mesh"
    nb, t_nb = timed(lambda: solve_sl(scn, grid, spec, backend="numba"))
    npy, t_np = timed(lambda: solve_sl(scn, grid, spec, backend="numpy"))
    rows.append((label, t_nb, t_np))
    checks.append(nb.cost == npy.cost
                  and np.array_equal(nb.trajectory.states,
                                     npy.trajectory.states))

    label = f"dal {grid.n_max} steps x {args.dal_iters} iters"
    nb, t_nb = timed(lambda: solve_dal(scn, grid, cfg=cfg, backend="numba"))
    npy, t_np = timed(lambda: solve_dal(scn, grid, cfg=cfg, backend="numpy"))
    rows.append((label, t_nb, t_np))
    checks.append(nb.cost == npy.cost
                  and np.array_equal(nb.controls.u1, npy.controls.u1))

    width = max(len(r[0]) for r in rows) + 2
    print(f"\nscenario {args.scenario}, dt={args.dt} ({grid.n_max} steps)")
    print(f"{'stage':<{width}}{'numba':>10}{'numpy':>10}{'speedup':>9}")
    for (label, t_nb, t_np) in rows:
        print(f"{label:<{width}}{t_nb:>9.3f}s{t_np:>9.3f}s"
              f"{t_np / t_nb:>8.1f}x")
    print(f"\nbackend outputs bit-identical: {all(checks)}")
    return 0 if all(checks) else 1


if __name__ == "__main__":
    raise SystemExit(main())
