"""Fokker-Planck first moment against the Langevin ensemble mean (300 K).

Prints one row per output time with both means, the Langevin standard error
and their separation in standard errors.
"""

import argparse

import numpy as np

from spinmech.fokker_planck import boltzmann_pdf, fokker_planck_evolve, grid_around
from spinmech.libration import (
    LibrationState,
    SpinTorqueModel,
    TrapParams,
    deterministic_evolve,
    langevin_ensemble,
    moment_of_inertia,
)


def cli():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-traj", type=int, default=10_000)
    ap.add_argument("--grid", type=int, default=257, help="points per phase-space axis")
    ap.add_argument("--t-max-ms", type=float, default=15.0)
    ap.add_argument("--n-times", type=int, default=21)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    trap = TrapParams(moment_of_inertia(10e-6, shape="ellipsoid", aspect=0.5), 2300.0, 6280.0)
    torque = SpinTorqueModel(1e8, 0.02715, np.pi / 4, t1=7e-3)
    t = np.linspace(0, args.t_max_ms * 1e-3, args.n_times)
    traj = deterministic_evolve(LibrationState(), trap, torque, np.linspace(0, t[-1], 301))
    th, v = grid_around(traj, trap, 300.0, args.grid, args.grid)
    fp = fokker_planck_evolve(boltzmann_pdf(th, v, trap, 300.0), trap, torque, 300.0, t)
    lg = langevin_ensemble(LibrationState(), trap, torque, t, 300.0, args.n_traj, args.seed, workers=args.workers)
    print("t_ms,fp_mean_mrad,langevin_mean_mrad,langevin_se_mrad,separation_se,fp_mass")
    for k in range(t.size):
        se = lg.stderr[k]
        sep = abs(fp.first_moments[k] - lg.mean[k]) / se if se > 0 else 0.0
        print(
            f"{t[k] * 1e3:.3f},{fp.first_moments[k] * 1e3:.5f},{lg.mean[k] * 1e3:.5f},"
            f"{se * 1e3:.5f},{sep:.2f},{fp.mass[k]:.10f}"
        )


if __name__ == "__main__":
    cli()
