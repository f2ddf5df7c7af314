"""Sampled continuous paths and the operations the tests need on them.

A Path is a dense matrix of values over a strictly increasing time
grid; a CoordMap says which columns belong to which variable.  The
central manipulation is restrict_and_rebase, which cuts a path to a
subinterval, selects variables, and subtracts the value at the left
endpoint so that only increments remain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")


class CoordMap:
    """Assignment of value columns to variables.

    blocks is a list of (variable index, first column, width); the
    column ranges must partition [0, dim).
    """

    def __init__(self, blocks):
        blocks = [(int(k), int(start), int(length)) for k, start, length in blocks]
        cols = sorted((start, start + length) for _, start, length in blocks)
        pos = 0
        for lo, hi in cols:
            if lo != pos or hi <= lo:
                raise ValueError("column ranges must partition [0, dim)")
            pos = hi
        if len({k for k, _, _ in blocks}) != len(blocks):
            raise ValueError("duplicate variable index in coordinate map")
        self.blocks = blocks
        self.dim = pos

    @classmethod
    def scalar(cls, d):
        """One scalar column per variable, variables 0..d-1 in order."""
        return cls([(k, k, 1) for k in range(d)])

    def variables(self):
        return sorted(k for k, _, _ in self.blocks)

    def columns(self, k):
        for var, start, length in self.blocks:
            if var == k:
                return list(range(start, start + length))
        raise IndexError(f"unknown variable {k}")

    def columns_of(self, coords):
        cols = []
        for k in sorted(coords):
            cols.extend(self.columns(k))
        return cols

    def restricted_to(self, coords):
        """New map over the selected variables with columns repacked."""
        blocks = []
        pos = 0
        for k in sorted(coords):
            width = len(self.columns(k))
            blocks.append((k, pos, width))
            pos += width
        return CoordMap(blocks)

    def __eq__(self, other):
        return isinstance(other, CoordMap) and sorted(self.blocks) == sorted(other.blocks)

    def __repr__(self):
        return f"CoordMap({self.blocks})"


class Path:
    """Values sampled on a strictly increasing time grid.

    time_augmented marks that the last column is an auxiliary time
    channel not covered by the coordinate map.
    """

    def __init__(self, t, x, coord_map, time_augmented=False):
        t = np.asarray(t, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("grid needs at least 2 points")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid must be strictly increasing")
        if x.shape[0] != len(t):
            raise ValueError("one value row per grid point required")
        expected = coord_map.dim + (1 if time_augmented else 0)
        if x.ndim != 2 or x.shape[1] != expected:
            raise ValueError(f"expected {expected} value columns, got {x.shape}")
        self.t = t
        self.x = x
        self.coord_map = coord_map
        self.time_augmented = time_augmented
        self.t.setflags(write=False)
        self.x.setflags(write=False)

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def horizon(self):
        return float(self.t[-1])


def _value_at(path, time):
    """Linear interpolation of all columns at a single time."""
    return np.array([np.interp(time, path.t, path.x[:, c])
                     for c in range(path.dim)])


def restrict_and_rebase(path, coords, iv, rebase=True):
    """Select variables, cut to [iv.a, iv.b], subtract the value at iv.a.

    Endpoints not on the grid are inserted by linear interpolation; the
    resulting path always starts at iv.a with value zero.  rebase=False
    keeps the original levels, for tests whose segments carry their
    initial value as part of the signal.
    """
    if path.time_augmented:
        raise ValueError("restrict before augmenting with time")
    coords = set(coords)
    if not coords:
        raise IndexError("need at least one coordinate")
    cols = path.coord_map.columns_of(coords)
    if not (0 <= iv.a and iv.b <= path.horizon and iv.a >= path.t[0]):
        raise ValueError(f"interval [{iv.a}, {iv.b}] outside the path horizon")

    inside = (path.t > iv.a) & (path.t < iv.b)
    t_new = np.concatenate(([iv.a], path.t[inside], [iv.b]))
    if len(t_new) < 2:
        raise ValueError("degenerate interval: fewer than 2 grid points")
    x_sel = path.x[:, cols]
    rows = [np.array([np.interp(iv.a, path.t, x_sel[:, c]) for c in range(x_sel.shape[1])])]
    rows.extend(x_sel[inside])
    rows.append(np.array([np.interp(iv.b, path.t, x_sel[:, c]) for c in range(x_sel.shape[1])]))
    x_new = np.vstack(rows)
    if rebase:
        x_new = x_new - x_new[0]
    return Path(t_new, x_new, path.coord_map.restricted_to(coords))


def augment_time(path):
    """Append the grid times as an extra auxiliary column."""
    if path.time_augmented:
        raise ValueError("time column already present")
    x_new = np.column_stack([path.x, path.t])
    return Path(path.t, x_new, path.coord_map, time_augmented=True)


def apply_missingness(path, drop_fraction, rng):
    """Drop round(drop_fraction * n) interior grid points at random.

    The first and last points are never dropped; seeded generators give
    reproducible output.
    """
    if not 0 <= drop_fraction < 1:
        raise ValueError("drop_fraction must be in [0, 1)")
    n = len(path.t)
    n_drop = int(round(drop_fraction * n))
    if n_drop == 0:
        return path
    interior = np.arange(1, n - 1)
    if n_drop > len(interior):
        raise ValueError("drop_fraction leaves fewer than 2 points")
    drop = rng.choice(interior, size=n_drop, replace=False)
    keep = np.setdiff1d(np.arange(n), drop)
    return Path(path.t[keep], path.x[keep], path.coord_map,
                time_augmented=path.time_augmented)


class PathSample:
    """A collection of i.i.d. path realizations sharing one CoordMap.

    Grids may differ across paths; dims must agree.
    """

    def __init__(self, paths, coord_map=None):
        paths = list(paths)
        if not paths:
            raise ValueError("empty sample")
        coord_map = coord_map or paths[0].coord_map
        for p in paths:
            if p.coord_map != coord_map:
                raise ValueError("paths must share the coordinate map")
        self.paths = paths
        self.coord_map = coord_map

    def __len__(self):
        return len(self.paths)

    def __getitem__(self, i):
        return self.paths[i]

    def map(self, fn):
        return PathSample([fn(p) for p in self.paths])


# ---------------------------------------------------------------------------
# Serialization.

def write_jsonl(sample, fp):
    """One JSON object per path: {"t": [...], "x": [[...]], "coord_map": [[k, start, len], ...]}."""
    for p in sample.paths:
        obj = {
            "t": p.t.tolist(),
            "x": p.x[:, :p.coord_map.dim].tolist(),
            "coord_map": [list(b) for b in p.coord_map.blocks],
        }
        fp.write(json.dumps(obj) + "\n")


def read_jsonl(fp):
    paths = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        cm = CoordMap(obj["coord_map"])
        paths.append(Path(obj["t"], obj["x"], cm))
    return PathSample(paths)


def read_csv_long(fp):
    """Import long-format CSV with header path_id,t,coord,value.

    Rows are pivoted per path: each distinct t becomes one grid point
    and each distinct coord one scalar column.  Every (t, coord) cell
    must be present for every path.
    """
    import csv

    rows = list(csv.DictReader(fp))
    if not rows:
        raise ValueError("empty CSV")
    by_path = {}
    for r in rows:
        by_path.setdefault(r["path_id"], []).append(
            (float(r["t"]), int(r["coord"]), float(r["value"])))
    coords = sorted({c for rs in by_path.values() for _, c, _ in rs})
    cm = CoordMap([(k, pos, 1) for pos, k in enumerate(coords)])
    col = {k: pos for pos, k in enumerate(coords)}
    paths = []
    for pid in sorted(by_path):
        rs = by_path[pid]
        times = sorted({t for t, _, _ in rs})
        x = np.full((len(times), len(coords)), np.nan)
        t_index = {t: i for i, t in enumerate(times)}
        for t, c, v in rs:
            x[t_index[t], col[c]] = v
        if np.any(np.isnan(x)):
            raise ValueError(f"path {pid}: missing (t, coord) cells")
        paths.append(Path(np.array(times), x, cm))
    return PathSample(paths)
