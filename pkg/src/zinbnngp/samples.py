"""Retained posterior draws and their on-disk layout.

One CSV per parameter group (header = component names, one row per draw)
plus ``samples.json`` listing the groups and the acceptance rates.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import SCALAR_PARAMS, ContractError, DataError

SAMPLES_INDEX = "samples.json"


class SamplesParseError(DataError):
    pass


@dataclass
class PosteriorSamples:
    draws: dict[str, np.ndarray]
    columns: dict[str, list[str]] = field(default_factory=dict)
    acceptance: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, arr in list(self.draws.items()):
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            self.draws[name] = arr
            if name not in self.columns:
                self.columns[name] = [name] if arr.shape[1] == 1 else [f"{name}[{k}]" for k in range(arr.shape[1])]
        sizes = {a.shape[0] for a in self.draws.values()}
        if len(sizes) > 1:
            raise ContractError(f"parameter groups hold different numbers of draws: {sorted(sizes)}")

    @property
    def n_draws(self) -> int:
        return next(iter(self.draws.values())).shape[0] if self.draws else 0

    def __getitem__(self, name: str) -> np.ndarray:
        arr = self.draws[name]
        return arr[:, 0] if name in SCALAR_PARAMS else arr

    def __contains__(self, name: str) -> bool:
        return name in self.draws

    def columns_flat(self):
        """Iterate (column label, draws) over every scalar component."""
        for name, arr in self.draws.items():
            for k, col in enumerate(self.columns[name]):
                yield col, arr[:, k]

    @classmethod
    def concat(cls, parts: list["PosteriorSamples"]) -> "PosteriorSamples":
        if not parts:
            raise ContractError("no samples to combine")
        draws = {k: np.concatenate([p.draws[k] for p in parts]) for k in parts[0].draws}
        acc = {k: float(np.mean([p.acceptance.get(k, np.nan) for p in parts])) for k in parts[0].acceptance}
        return cls(draws, dict(parts[0].columns), acc, {"chains": len(parts)})

    def to_dir(self, path: str | Path) -> list[Path]:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        written = []
        for name, arr in self.draws.items():
            f = path / f"{name}.csv"
            with open(f, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(self.columns[name])
                for row in arr:
                    w.writerow([repr(float(v)) for v in row])
            written.append(f)
        index = {"groups": list(self.draws), "acceptance": self.acceptance, "meta": self.meta}
        f = path / SAMPLES_INDEX
        f.write_text(json.dumps(index, indent=2, sort_keys=True, default=_jsonable))
        written.append(f)
        return written

    @classmethod
    def from_dir(cls, path: str | Path) -> "PosteriorSamples":
        path = Path(path)
        idx_file = path / SAMPLES_INDEX
        if not idx_file.exists():
            raise SamplesParseError(f"{idx_file}: missing samples index")
        try:
            index = json.loads(idx_file.read_text())
        except json.JSONDecodeError as e:
            raise SamplesParseError(f"{idx_file}:{e.lineno}: {e.msg}") from None
        draws, columns = {}, {}
        for name in index["groups"]:
            f = path / f"{name}.csv"
            columns[name], draws[name] = _read_group(f)
        return cls(draws, columns, index.get("acceptance", {}), index.get("meta", {}))


def _read_group(f: Path):
    if not f.exists():
        raise SamplesParseError(f"{f}: missing sample file")
    with open(f, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SamplesParseError(f"{f}:1: empty file")
    header = rows[0]
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SamplesParseError(f"{f}:{lineno}: expected {len(header)} fields, found {len(row)}")
        try:
            values.append([float(v) for v in row])
        except ValueError:
            raise SamplesParseError(f"{f}:{lineno}: non-numeric value") from None
    return header, np.asarray(values, dtype=float).reshape(len(values), len(header))


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o)}")
