"""Long-format CSV datasets and simulation truth sidecars.

Dataset files have the header ``group_id,curve_id,t,y`` and one row per
observation. Groups and curves keep the order in which they first appear;
rows of one curve need not be contiguous but must have increasing times.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ParseError
from .model import Curve, FunctionalDataset
from .simulate import Truth

HEADER = ["group_id", "curve_id", "t", "y"]


def load_dataset(path, domain=None):
    """Read a dataset; the time domain defaults to the observed time range."""
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != HEADER:
            raise ParseError(f"expected header {','.join(HEADER)}", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", line=line)
            gid, cid = row[0].strip(), row[1].strip()
            if not gid or not cid:
                raise ParseError("empty group_id or curve_id", line=line)
            try:
                t, y = float(row[2]), float(row[3])
            except ValueError:
                raise ParseError(f"non-numeric t or y: {row[2]!r}, {row[3]!r}", line=line) from None
            if not (np.isfinite(t) and np.isfinite(y)):
                raise ParseError("t and y must be finite", line=line)
            groups.setdefault(gid, {}).setdefault(cid, ([], []))
            ts, ys = groups[gid][cid]
            if ts and t <= ts[-1]:
                raise ConfigurationError(
                    f"curve {gid}/{cid}: times must be strictly increasing (line {line})")
            ts.append(t)
            ys.append(y)
    if not groups:
        raise ParseError("file holds no observations")
    curves = [[Curve(*v) for v in g.values()] for g in groups.values()]
    names = tuple(tuple(f"{gid}/{cid}" for cid in g) for gid, g in groups.items())
    if domain is None:
        all_t = np.concatenate([c.times for grp in curves for c in grp])
        domain = (float(all_t.min()), float(all_t.max()))
    return FunctionalDataset(curves, t0=domain[0], tf=domain[1], names=names)


def curve_ids(dataset, g, i):
    if dataset.names is not None:
        gid, _, cid = dataset.names[g][i].partition("/")
        return gid, cid
    return str(g), str(i)


def save_dataset(dataset, path):
    """Write ``dataset`` so that :func:`load_dataset` reproduces it exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for g, i, c in dataset.curves():
            gid, cid = curve_ids(dataset, g, i)
            for t, y in zip(c.times, c.values):
                w.writerow([gid, cid, repr(float(t)), repr(float(y))])
    return Path(path)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def save_truth(truth, path):
    """Store a :class:`Truth` as ``.npz``; curves are concatenated with offsets."""
    lengths = [len(t) for t in truth.times]
    np.savez(
        path,
        times=np.concatenate(truth.times),
        curves=np.concatenate(truth.curves),
        offsets=np.concatenate([[0], np.cumsum(lengths)]),
        xi=truth.xi,
        phi=truth.phi,
        q=truth.q,
        params=json.dumps({k: _jsonable(v) for k, v in truth.params.items()}),
    )
    return Path(path)


def load_truth(path):
    with np.load(path, allow_pickle=False) as d:
        o = d["offsets"]
        times = [d["times"][o[n]:o[n + 1]] for n in range(o.size - 1)]
        curves = [d["curves"][o[n]:o[n + 1]] for n in range(o.size - 1)]
        params = json.loads(str(d["params"]))
        return Truth(times=times, curves=curves, xi=d["xi"], phi=d["phi"], params=params,
                     q=int(d["q"]))
