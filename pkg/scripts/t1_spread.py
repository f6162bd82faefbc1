"""Spread of the protocol-level T1 estimate over seeds and shot averaging."""

import argparse

import numpy as np

from spinmech.cli import preset
from spinmech.cli.config import validate
from spinmech.cli.experiments import EXPERIMENTS


def cli():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=8)
    ap.add_argument("--shots", type=int, nargs="+", default=[1, 4, 10])
    args = ap.parse_args()

    raw = preset("fig3-t1")
    raw.pop("experiment")
    raw.pop("seed")
    exp = EXPERIMENTS["t1"]
    print("n_shots,seed,fitted_t1_ms")
    for shots in [0] + args.shots:
        raw["protocol"]["n_shots"] = shots
        cfg = validate(raw, exp.schema)
        fits = []
        for seed in range(1 if shots == 0 else args.seeds):
            t1 = exp.run(cfg, seed, 1).results["fitted_t1_s"] * 1e3
            fits.append(t1)
            print(f"{shots},{seed},{t1:.4f}")
        if shots:
            print(f"# n_shots={shots}: mean {np.mean(fits):.3f} ms, range {min(fits):.3f}..{max(fits):.3f} ms")


if __name__ == "__main__":
    cli()
