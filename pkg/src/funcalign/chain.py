"""Stored MCMC output and its on-disk layout.

A chain directory holds two files:

``meta.json``
    ``{"format": "funcalign-chain", "version": 1, "model": ..., "seed": ...,
    "config": {...}, "dims": {...}, "group_sizes": [...], "hyper": {...},
    "blocks": {name: shape-without-draw-axis}}``

``draws.npz``
    one array per parameter block with the stored draw as leading axis,
    ``iterations`` (sweep index of each stored draw) and the acceptance
    arrays prefixed ``acc_``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import UsageError

FORMAT = "funcalign-chain"
VERSION = 1

_NAME = re.compile(r"^(\w+)(?:\[([\d,\s]+)\])?$")


@dataclass
class Chain:
    model: str
    draws: dict
    iterations: np.ndarray
    acceptance: dict
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return int(self.iterations.size)

    @property
    def seed(self):
        return self.meta.get("seed")

    def trace(self, name):
        """Series of one scalar coordinate, e.g. ``"lambda"`` or ``"phi[3,4]"``.

        Indices are 0-based; per-curve blocks are indexed by flat curve
        position, group blocks by group.
        """
        m = _NAME.match(name.replace(" ", ""))
        if m is None or m.group(1) not in self.draws:
            raise KeyError(f"unknown coordinate {name!r}")
        arr = np.asarray(self.draws[m.group(1)])
        idx = () if m.group(2) is None else tuple(int(v) for v in m.group(2).split(","))
        if arr.ndim - 1 != len(idx):
            raise KeyError(f"{name!r} needs {arr.ndim - 1} indices")
        return arr[(slice(None),) + idx]

    def scalar_names(self):
        names = []
        for key, arr in self.draws.items():
            arr = np.asarray(arr)
            if arr.ndim == 1:
                names.append(key)
            else:
                for idx in np.ndindex(*arr.shape[1:]):
                    names.append(f"{key}[{','.join(map(str, idx))}]")
        return names

    def acceptance_rates(self):
        acc, prop = self.acceptance["accepted"], self.acceptance["proposed"]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(prop > 0, acc / np.maximum(prop, 1), np.nan)

    def common_curve_draws(self, design):
        """Draws of the shared curve(s) evaluated with ``design`` (n x p)."""
        if self.n_draws == 0:
            raise UsageError("empty chain")
        beta = np.asarray(self.draws["beta"])
        if self.model == "baseline":
            a0 = np.asarray(self.draws["a0"])[:, None]
            c0 = np.asarray(self.draws["c0"])[:, None]
            return (a0 * (beta @ design.T) + c0)[:, None, :]
        return np.einsum("sgp,np->sgn", beta, design)

    def save(self, path):
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        meta = dict(self.meta)
        meta.update(format=FORMAT, version=VERSION, model=self.model,
                    blocks={k: list(np.shape(v)[1:]) for k, v in self.draws.items()})
        (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        arrays = {k: np.asarray(v) for k, v in self.draws.items()}
        arrays["iterations"] = self.iterations
        arrays.update({f"acc_{k}": np.asarray(v) for k, v in self.acceptance.items()})
        np.savez(path / "draws.npz", **arrays)
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        meta = json.loads((path / "meta.json").read_text())
        if meta.get("format") != FORMAT:
            raise UsageError(f"{path} is not a chain directory")
        with np.load(path / "draws.npz", allow_pickle=False) as data:
            arrays = {k: data[k] for k in data.files}
        blocks = meta.pop("blocks")
        model = meta.pop("model")
        draws = {k: arrays[k] for k in blocks}
        acceptance = {k[4:]: v for k, v in arrays.items() if k.startswith("acc_")}
        if "nonfinite" in acceptance:
            acceptance["nonfinite"] = np.asarray(acceptance["nonfinite"])
        return cls(model=model, draws=draws, iterations=arrays["iterations"],
                   acceptance=acceptance, meta=meta)
