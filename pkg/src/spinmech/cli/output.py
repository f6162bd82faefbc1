"""CSV and JSON emission. Floats use ``repr`` so both formats carry the same digits."""

from __future__ import annotations

import json
import math


def _flatten(tree: dict, prefix: str = "") -> list[tuple[str, object]]:
    out = []
    for k in tree:
        v = tree[k]
        if isinstance(v, dict):
            out += _flatten(v, f"{prefix}{k}.")
        else:
            out.append((f"{prefix}{k}", v))
    return out


def _scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_scalar(x) for x in v) + "]"
    if v is None:
        return "none"
    return str(v)


def _cell(v) -> str:
    s = _scalar(v)
    if any(ch in s for ch in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def to_csv(meta: dict, table) -> str:
    lines = [f"# spinmech {meta['version']}", f"# experiment = {meta['experiment']}", f"# seed = {meta['seed']}"]
    lines += [f"# config.{k} = {_scalar(v)}" for k, v in _flatten(meta["config"])]
    lines += [f"# result.{k} = {_scalar(v)}" for k, v in table.results.items()]
    lines.append(",".join(table.columns))
    lines += [",".join(_cell(x) for x in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)  # "inf" / "nan" as strings keep the document standard JSON
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_json_safe(x) for x in v]
    return v


def to_json(meta: dict, table) -> str:
    doc = {
        "config": _json_safe({"version": meta["version"], "experiment": meta["experiment"], "seed": meta["seed"], **meta["config"]}),
        "results": _json_safe(table.results),
        "columns": list(table.columns),
        "data": _json_safe([list(r) for r in table.rows]),
    }
    return json.dumps(doc, indent=1) + "\n"


def read_csv_payload(text: str):
    """Columns and rows of a CSV written by :func:`to_csv` (numbers as float)."""
    import csv

    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(body)
    columns = next(reader)

    def conv(s):
        try:
            return float(s)
        except ValueError:
            return s

    return columns, [[conv(x) for x in row] for row in reader]
