"""Reading and writing grid fields, Wigner components and trajectories.

CSV files hold one row per lattice point, ``q,p,re,im``, in row-major order
(momentum outer, position inner) with 17 significant digits.  JSON documents
carry the grid description and ``[re, im]`` pairs in the same order.
"""
from __future__ import annotations

import csv
import json
import os

import numpy as np

from .phasegrid import GridField, PhaseGrid, UnitSystem
from .starcalc import Symbol
from .wigner import COMPONENT_NAMES, WignerComponents

__all__ = [
    "COMPONENT_SUFFIXES",
    "grid_to_dict",
    "grid_from_dict",
    "field_to_json",
    "field_from_json",
    "write_field",
    "read_field",
    "write_components",
    "read_components",
    "write_diagnostics",
    "write_trajectory",
    "dumps",
    "fmt",
]

COMPONENT_SUFFIXES = dict(zip(COMPONENT_NAMES, (".even+", ".even-", ".odd+", ".odd-")))


def fmt(x) -> str:
    return format(float(x), ".17g")


def _clean(obj):
    """Round-trippable JSON numbers: numpy scalars to Python floats at 17 digits."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def grid_to_dict(grid: PhaseGrid) -> dict:
    u = grid.units
    return {
        "n": grid.n,
        "q_min": grid.q_min,
        "q_max": grid.q_max,
        "p_min": grid.p_min,
        "p_max": grid.p_max,
        "hbar": u.hbar,
        "mass": u.mass,
        "c": u.c,
    }


def grid_from_dict(d: dict) -> PhaseGrid:
    units = UnitSystem(hbar=d["hbar"], mass=d["mass"], c=d["c"])
    return PhaseGrid(int(d["n"]), d["q_min"], d["q_max"], d["p_min"], d["p_max"], units)


def field_to_json(field: GridField) -> str:
    v = field.values.reshape(-1)
    return dumps({
        "grid": grid_to_dict(field.grid),
        "values": np.stack([v.real, v.imag], axis=1).tolist(),
    })


def field_from_json(text: str) -> Symbol:
    doc = json.loads(text)
    g = grid_from_dict(doc["grid"])
    arr = np.asarray(doc["values"], dtype=float)
    return Symbol(g, (arr[:, 0] + 1j * arr[:, 1]).reshape(g.n, g.n))


def _field_csv(field: GridField) -> str:
    g = field.grid
    lines = ["q,p,re,im"]
    q = [fmt(x) for x in g.q]
    for i, p in enumerate(g.p):
        ps = fmt(p)
        row = field.values[i]
        lines.extend(f"{q[j]},{ps},{fmt(row[j].real)},{fmt(row[j].imag)}" for j in range(g.n))
    return "\n".join(lines) + "\n"


def write_field(field: GridField, path, fmt_name="csv") -> str:
    """Write one field; returns the path written."""
    if fmt_name == "csv":
        text = _field_csv(field)
    elif fmt_name == "json":
        text = field_to_json(field)
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt_name!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return str(path)


def read_field(path, grid: PhaseGrid = None) -> Symbol:
    """Read a field written by :func:`write_field`; CSV needs the grid."""
    path = str(path)
    with open(path) as fh:
        if path.endswith(".json"):
            return field_from_json(fh.read())
        if grid is None:
            raise ValueError("reading CSV needs the grid")
        rows = list(csv.DictReader(fh))
    vals = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    return Symbol(grid, vals.reshape(grid.n, grid.n))


def write_components(comp: WignerComponents, stem, fmt_name="csv") -> list:
    """Four CSV files ``stem.even+.csv`` ... or a single ``stem.json``."""
    stem = str(stem)
    if fmt_name == "csv":
        return [
            write_field(sym, f"{stem}{COMPONENT_SUFFIXES[name]}.csv", "csv")
            for name, sym in comp.items()
        ]
    if fmt_name == "json":
        doc = {"grid": grid_to_dict(comp.grid), "components": {}}
        for name, sym in comp.items():
            v = sym.values.reshape(-1)
            doc["components"][COMPONENT_SUFFIXES[name][1:]] = np.stack([v.real, v.imag], axis=1).tolist()
        path = f"{stem}.json"
        with open(path, "w") as fh:
            fh.write(dumps(doc))
        return [path]
    raise ValueError(f"format must be 'csv' or 'json', got {fmt_name!r}")


def read_components(stem, grid: PhaseGrid = None, fmt_name="csv") -> WignerComponents:
    stem = str(stem)
    if fmt_name == "json":
        with open(f"{stem}.json") as fh:
            doc = json.load(fh)
        g = grid_from_dict(doc["grid"])
        out = []
        for name in COMPONENT_NAMES:
            arr = np.asarray(doc["components"][COMPONENT_SUFFIXES[name][1:]], dtype=float)
            out.append(Symbol(g, (arr[:, 0] + 1j * arr[:, 1]).reshape(g.n, g.n)))
        return WignerComponents(*out)
    return WignerComponents(*(read_field(f"{stem}{COMPONENT_SUFFIXES[name]}.csv", grid) for name in COMPONENT_NAMES))


def write_diagnostics(traj, path) -> str:
    with open(path, "w", newline="") as fh:
        fh.write("t,norm_even,norm_odd,mean_q,mean_p\n")
        for t, d in zip(traj.times, traj.diagnostics):
            fh.write(",".join(fmt(x) for x in (t, d["norm_even"], d["norm_odd"], d["mean_q"], d["mean_p"])) + "\n")
    return str(path)


def write_trajectory(traj, directory, fmt_name="csv") -> list:
    """Snapshot files, ``diagnostics.csv`` and a ``trajectory.json`` index."""
    os.makedirs(directory, exist_ok=True)
    written = []
    index = {"grid": grid_to_dict(traj.snapshots[0].grid), "snapshots": []}
    for k, (t, snap) in enumerate(zip(traj.times, traj.snapshots)):
        stem = os.path.join(directory, f"snapshot_{k:05d}")
        files = write_components(snap, stem, fmt_name)
        written.extend(files)
        index["snapshots"].append({"t": t, "files": [os.path.basename(f) for f in files]})
    written.append(write_diagnostics(traj, os.path.join(directory, "diagnostics.csv")))
    idx = os.path.join(directory, "trajectory.json")
    with open(idx, "w") as fh:
        fh.write(dumps(index))
    written.append(idx)
    return written
