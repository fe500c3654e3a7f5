"""Atomic writers and readers for the CSV/JSON artifacts."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

import numpy as np

FLOAT_FMT = "%.17g"


def atomic_write(path, data) -> None:
    """Write to a temp file in the target directory, then rename over path."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        # mkstemp creates 0600; give the file the usual umask-derived mode
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(obj) -> str:
    # json writes floats with repr, which round-trips exactly
    return json.dumps(_clean(obj), indent=1, sort_keys=False) + "\n"


def write_json(path, obj) -> None:
    atomic_write(path, dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return FLOAT_FMT % float(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def grid_header(dim: int):
    idx = ["i", "j", "k"][:dim]
    ctr = ["x_center", "y_center", "z_center"][:dim]
    return idx + ctr + ["jump"]


def arc_header(dim: int):
    return ["t_index"] + ["x", "y", "z"][:dim] + ["residual", "grad_mag"]


def write_grid(path, grid) -> None:
    atomic_write(path, csv_text(grid_header(grid.dim), grid.rows()))


def write_arc(path, arc) -> None:
    atomic_write(path, csv_text(arc_header(arc.dim), arc.rows()))


def read_table(path):
    """Header list and float array of a CSV artifact."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, data


def table_kind(header) -> str:
    if header and header[0] == "t_index":
        return "arc"
    if header and header[0] == "i" and header[-1] == "jump":
        return "grid"
    raise ValueError(f"unrecognized CSV columns {header}")
