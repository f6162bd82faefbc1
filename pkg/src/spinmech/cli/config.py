"""Config parsing: SI-suffixed values, strict per-experiment schemas."""

from __future__ import annotations

import math
import re
from decimal import Decimal
from dataclasses import dataclass
from typing import Any

import tomli


class ConfigError(Exception):
    """Invalid configuration; the message names the offending field."""


REQUIRED = object()

_SCALE = {
    "field": {"T": 1.0, "mT": 1e-3, "uT": 1e-6, "µT": 1e-6, "nT": 1e-9, "G": 1e-4, "mG": 1e-7},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "angle": {"rad": 1.0, "mrad": 1e-3, "deg": math.pi / 180.0},
    "temperature": {"K": 1.0},
    "rate": {"/s": 1.0, "1/s": 1.0, "rad/s": 1.0},
    "inertia": {"kg m^2": 1.0, "kgm^2": 1.0},
    "density": {"kg/m^3": 1.0},
    "number": {},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*(.*?)\s*$")


def parse_quantity(value: Any, kind: str, where: str = "value") -> float:
    """Number in SI units; strings may carry a unit suffix of the given kind.

    >>> parse_quantity("271.5G", "field")
    0.02715
    >>> parse_quantity("7ms", "time")
    0.007
    >>> parse_quantity("5um", "length")
    5e-06
    """
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a number, got {type(value).__name__}")
    m = _QUANTITY.match(value)
    if not m:
        raise ConfigError(f"{where}: cannot parse quantity {value!r}")
    number, unit = m.group(1), m.group(2)
    if not unit:
        return float(number)
    table = _SCALE[kind]
    if unit not in table:
        allowed = ", ".join(table) or "none"
        raise ConfigError(f"{where}: unit {unit!r} not valid here (allowed: {allowed})")
    # decimal product so "5um" is exactly the double nearest 5e-6
    return float(Decimal(number) * Decimal(repr(table[unit])))


@dataclass(frozen=True)
class Param:
    kind: str  # a unit kind, or int / bool / str / list:<kind> / choice
    default: Any = REQUIRED
    doc: str = ""
    choices: tuple = ()


def _coerce(value, p: Param, where: str):
    kind = p.kind
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(f"{where}: expected an integer")
        try:
            f = float(value)
        except ValueError:
            raise ConfigError(f"{where}: expected an integer, got {value!r}") from None
        if not f.is_integer():
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(f)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    if kind == "choice":
        if value not in p.choices:
            raise ConfigError(f"{where}: {value!r} is not one of {list(p.choices)}")
        return value
    if kind.startswith("list:"):
        inner = Param(kind[5:])
        items = value if isinstance(value, list) else [value]
        if not items:
            raise ConfigError(f"{where}: list must not be empty")
        return [_coerce(v, inner, f"{where}[{i}]") for i, v in enumerate(items)]
    return parse_quantity(value, kind, where)


def validate(raw: dict, schema: dict, prefix: str = "") -> dict:
    """Apply a nested schema: reject unknown keys, fill defaults, coerce units."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{prefix or 'config'}: expected a table")
    out = {}
    for key in raw:
        if key not in schema:
            where = f"{prefix}{key}"
            known = ", ".join(sorted(schema))
            raise ConfigError(f"unknown key {where!r} (known here: {known})")
    for key, spec in schema.items():
        where = f"{prefix}{key}"
        if isinstance(spec, dict):
            out[key] = validate(raw.get(key, {}), spec, where + ".")
            continue
        if key in raw:
            out[key] = _coerce(raw[key], spec, where)
        elif spec.default is REQUIRED:
            raise ConfigError(f"missing required field {where!r}" + (f" ({spec.doc})" if spec.doc else ""))
        else:
            out[key] = spec.default
    return out


def load_toml_text(text: str, source: str = "<config>") -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_override_value(text: str):
    """TOML scalar or list if it parses, else the raw string (for ``271.5G``)."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def set_dotted(tree: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = tree
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"override {dotted!r}: {p!r} is not a section")
        node = nxt
    node[parts[-1]] = value


def leaf_paths(schema: dict, prefix: str = "") -> list[str]:
    out = []
    for k, v in schema.items():
        if isinstance(v, dict):
            out += leaf_paths(v, f"{prefix}{k}.")
        else:
            out.append(f"{prefix}{k}")
    return out


def resolve_key(schema: dict, key: str) -> str:
    """Full dotted path for ``key``; a bare leaf name is accepted if unique."""
    paths = leaf_paths(schema)
    if key in paths:
        return key
    matches = [p for p in paths if p.rsplit(".", 1)[-1] == key]
    if len(matches) == 1:
        return matches[0]
    if len(matches) > 1:
        raise ConfigError(f"key {key!r} is ambiguous: {', '.join(matches)}")
    raise ConfigError(f"unknown key {key!r}")
