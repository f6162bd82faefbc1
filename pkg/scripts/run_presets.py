"""Run every bundled preset and write one CSV per preset into an output directory."""

import argparse
import pathlib
import sys
import time

from spinmech.cli import main, preset_names


def cli():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--skip", action="append", default=[], help="preset to skip (repeatable)")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    for name in preset_names():
        if name in args.skip:
            continue
        path = out / f"{name}.{args.format}"
        t0 = time.perf_counter()
        code = main(["run", "--preset", name, "--format", args.format, "--workers", str(args.workers), "--output", str(path)])
        print(f"{name:24s} exit {code}  {time.perf_counter() - t0:6.1f} s  -> {path}")
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(cli())
