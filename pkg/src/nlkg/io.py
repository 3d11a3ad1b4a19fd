"""Persistence: field files, deterministic JSON, graph tables and CSV series.

Binary field format (little endian)::

    8 bytes   magic b"NLKGFLD1"
    u64       N (samples per slot)
    u64       number of slots (1 for a Field, 2 for a State)
    f64[...]  slot 0 samples, then slot 1

CSV field format: header ``x,u1,u2`` (or ``x,u1``), one grid point per row.
JSON floats are written with 17 significant digits so that records
round-trip exactly and identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
import os
import struct
from pathlib import Path

import numpy as np

from .grid import Grid, State

MAGIC = b"NLKGFLD1"


# ---- fields ---------------------------------------------------------------

def write_field(path, data, grid: Grid | None = None):
    """Write a State, Field-array (N,) or stacked state (2, N).

    ``.csv`` paths get the text format (needs ``grid`` for the x column),
    anything else the binary one.
    """
    a = data.stack() if isinstance(data, State) else np.asarray(data, dtype=float)
    a = np.atleast_2d(a)
    path = Path(path)
    if path.suffix == ".csv":
        g = grid or (data.grid if isinstance(data, State) else None)
        if g is None:
            raise ValueError("CSV field output needs the grid")
        names = ["x", "u1", "u2"][: a.shape[0] + 1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for i in range(a.shape[1]):
                w.writerow([_num(g.x[i])] + [_num(a[s, i]) for s in range(a.shape[0])])
        return
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", a.shape[1], a.shape[0]))
        fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_field(path) -> np.ndarray:
    """Samples as an array of shape (slots, N)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
        if head == MAGIC:
            n, slots = struct.unpack("<QQ", fh.read(16))
            a = np.frombuffer(fh.read(), dtype="<f8")
            if a.size != n * slots:
                raise ValueError(f"{path}: expected {n * slots} samples, found {a.size}")
            return a.reshape(slots, n).astype(float)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = [i for i, name in enumerate(header) if name != "x"]
    return np.array([[float(r[i]) for r in body] for i in cols])


def read_state(path, grid: Grid) -> State:
    a = read_field(path)
    if a.shape[1] != grid.N:
        raise ValueError(f"{path}: field has N={a.shape[1]}, grid has N={grid.N}")
    return State(grid, a[0], a[1] if a.shape[0] > 1 else None)


# ---- JSON -------------------------------------------------------------------

def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == int(x) and abs(x) < 2**53:
        return f"{int(x)}.0"
    return repr(x)  # shortest string that round-trips


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [_encode(x, indent, level + 1) for x in obj]
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in obj):
            return "[" + ", ".join(items) + "]"
        return "[\n" + ",\n".join(pad + i for i in items) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(pad + i for i in items) + "\n" + end + "}"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits; key order is preserved."""
    return _encode(obj, indent, 0) + "\n"


def dump_json(obj, path):
    Path(path).write_text(dumps(obj))


def load_json(path):
    return json.loads(Path(path).read_text())


# ---- graphs -------------------------------------------------------------------

def save_graph(sample, path, inline: bool = False):
    """Graph table as JSON {samples: [{psi_ref, value}], ell, delta, tag}.

    ``psi_ref`` is a binary field file next to the JSON (or the inline
    samples when ``inline``).
    """
    path = Path(path)
    entries = []
    fdir = path.with_name(path.stem + "_fields")
    if not inline:
        fdir.mkdir(parents=True, exist_ok=True)
    for i, (psi, val) in enumerate(zip(sample.psi, sample.values)):
        if inline:
            ref = {"u1": psi[0].tolist(), "u2": psi[1].tolist()}
        else:
            fp = fdir / f"psi_{i:04d}.fld"
            write_field(fp, psi)
            ref = os.path.relpath(fp, path.parent)
        entries.append({"psi_ref": ref, "value": np.atleast_1d(val).tolist()})
    dump_json({"samples": entries, "ell": sample.ell, "delta": sample.delta, "tag": sample.tag}, path)


def load_graph(path):
    from .manifold import GraphSample

    path = Path(path)
    d = load_json(path)
    psis, vals = [], []
    for e in d["samples"]:
        ref = e["psi_ref"]
        if isinstance(ref, dict):
            psis.append(np.array([ref["u1"], ref["u2"]], dtype=float))
        else:
            psis.append(read_field(path.parent / ref))
        vals.append(np.atleast_1d(np.asarray(e["value"], dtype=float)))
    return GraphSample(np.array(psis), np.array(vals), float(d["ell"]), float(d["delta"]),
                       d.get("tag", "cs"))


# ---- CSV series ------------------------------------------------------------------

def write_csv(path, header, rows, schema: dict | None = None):
    """CSV with a header row; ``schema`` (column -> description) goes to a sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(x) if isinstance(x, (float, np.floating)) else x for x in r])
    if schema is not None:
        dump_json({"file": path.name, "columns": [{"name": c, "description": schema.get(c, "")}
                                                  for c in header]},
                  path.with_suffix(".schema.json"))


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
