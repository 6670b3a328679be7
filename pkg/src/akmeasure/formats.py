"""Text serialization shared by the library and the CLI.

Machine outputs print floats with 17 significant digits so every value
round-trips exactly; human tables use 6.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "fmt",
    "dumps",
    "write_json",
    "read_json",
    "write_csv",
    "matrix_to_json",
    "matrix_from_json",
    "human_table",
]


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with 17-significant-digit floats and stable key order."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, (int, np.integer, str)) else fmt(v) for v in row])
    return path


def matrix_to_json(M) -> dict:
    M = np.asarray(M, dtype=float)
    return {"n": M.shape[0] // 2, "rows": M.tolist()}


def matrix_from_json(d) -> np.ndarray:
    """Parse ``{n, rows}``; rows must form a 2n x 2n float matrix."""
    if not isinstance(d, dict) or set(d) - {"n", "rows"} or "rows" not in d:
        raise ValueError("matrix JSON must be an object with keys 'n' and 'rows'")
    M = np.array(d["rows"], dtype=float)
    n = d.get("n", M.shape[0] // 2 if M.ndim == 2 else 0)
    if M.ndim != 2 or M.shape != (2 * n, 2 * n):
        raise ValueError(f"rows of shape {M.shape} do not match n={n}")
    return M


def human_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    cells = [list(header)] + [
        [f"{v:.6g}" if isinstance(v, (float, np.floating)) else str(v) for v in row] for row in rows
    ]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
