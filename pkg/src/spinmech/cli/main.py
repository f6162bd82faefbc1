"""``spinmech run``: resolve a config, run one experiment, write CSV or JSON.

Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources

from .. import __version__
from ..errors import InvalidInputError, NumericalError
from .config import ConfigError, load_toml_text, parse_override_value, resolve_key, set_dotted, validate
from .experiments import EXPERIMENTS
from .output import to_csv, to_json

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

_TOP_LEVEL = {"experiment", "seed"}


def preset_names() -> list[str]:
    files = resources.files("spinmech.cli").joinpath("presets").iterdir()
    return sorted(f.name[: -len(".toml")] for f in files if f.name.endswith(".toml"))


def preset_text(name: str) -> str:
    if name not in preset_names():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return resources.files("spinmech.cli").joinpath("presets", f"{name}.toml").read_text()


def preset(name: str) -> dict:
    return load_toml_text(preset_text(name), f"preset {name}")


def _merge(base: dict, top: dict) -> dict:
    out = dict(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _extra_pairs(extra: list[str]) -> list[tuple[str, str]]:
    pairs, i = [], 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"option {tok!r} needs a value")
            val = extra[i + 1]
            i += 2
        pairs.append((key, val))
    return pairs


def resolve(args, extra: list[str]) -> tuple[str, int, dict]:
    """Merge preset, config file, flags and overrides into a validated config."""
    raw: dict = {}
    if args.preset:
        raw = preset(args.preset)
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        raw = _merge(raw, load_toml_text(text, args.config))
    if args.experiment:
        raw["experiment"] = args.experiment
    name = raw.pop("experiment", None)
    if name is None:
        raise ConfigError("missing required field 'experiment' (use --experiment, --config or --preset)")
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment {name!r} is not one of {', '.join(EXPERIMENTS)}")
    seed = raw.pop("seed", 0)
    schema = EXPERIMENTS[name].schema

    overrides = []
    for item in args.override or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        overrides.append(tuple(item.split("=", 1)))
    overrides += _extra_pairs(extra)
    for key, val in overrides:
        if key == "seed":
            seed = parse_override_value(val)
            continue
        set_dotted(raw, resolve_key(schema, key), parse_override_value(val))
    if args.seed is not None:
        seed = args.seed
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    return name, seed, validate(raw, schema)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinmech", description="Spin-mechanics simulations and fits.")
    ap.add_argument("--version", action="version", version=f"spinmech {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    run.add_argument("--config", help="TOML config file")
    run.add_argument("--preset", help="named preset (see 'spinmech presets')")
    run.add_argument("--seed", type=int)
    run.add_argument("--output", help="output path (default: stdout)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--override", action="append", metavar="KEY=VALUE", help="repeatable; dotted keys")
    run.add_argument("--workers", type=int, default=1, help="threads for stochastic ensembles")
    sub.add_parser("presets", help="list presets")
    show = sub.add_parser("show-preset", help="print a preset with its comments")
    show.add_argument("name")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    try:
        if args.command == "presets":
            print("\n".join(preset_names()))
            return EXIT_OK
        if args.command == "show-preset":
            sys.stdout.write(preset_text(args.name))
            return EXIT_OK
        if extra and args.command != "run":
            raise ConfigError(f"unexpected arguments {extra}")
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        name, seed, cfg = resolve(args, extra)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        table = EXPERIMENTS[name].run(cfg, seed, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidInputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    meta = {"version": __version__, "experiment": name, "seed": seed, "config": cfg}
    text = to_json(meta, table) if args.format == "json" else to_csv(meta, table)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK
