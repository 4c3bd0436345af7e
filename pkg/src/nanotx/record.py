"""Sampled trajectory container and its CSV serialization.

CSV layout: '# key = value' metadata lines, a header row, then data rows.
Numbers are written with 12 significant digits so that a read/write cycle
is byte-stable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


@dataclass
class TimeSeriesRecord:
    """Sampled trajectory: time, permeability, and molecule-count columns.

    columns maps column name (e.g. "N_in_A", "N_out_B") to an array of the
    same length as time.  Accumulated columns (released/received) are
    nondecreasing.
    """

    time: np.ndarray
    rho: np.ndarray
    columns: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != self.time.shape:
            raise ValueError("rho and time must have equal length")
        for name, col in self.columns.items():
            col = np.asarray(col, dtype=float)
            if col.shape != self.time.shape:
                raise ValueError(f"column {name!r} length mismatch")
            self.columns[name] = col

    def __len__(self):
        return len(self.time)

    @property
    def column_names(self):
        return list(self.columns)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key} = {self.metadata[key]}\n")
        names = ["t", "rho"] + list(self.columns)
        buf.write(",".join(names) + "\n")
        cols = [self.time, self.rho] + [self.columns[n] for n in self.columns]
        for row in zip(*cols):
            buf.write(",".join(_fmt(x) for x in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path) -> "TimeSeriesRecord":
        with open(path) as fh:
            return cls.parse_csv(fh.read())

    @classmethod
    def parse_csv(cls, text: str) -> "TimeSeriesRecord":
        metadata = {}
        lines = text.splitlines()
        i = 0
        while i < len(lines) and lines[i].startswith("#"):
            body = lines[i][1:].strip()
            key, _, val = body.partition("=")
            metadata[key.strip()] = val.strip()
            i += 1
        if i >= len(lines):
            raise ValueError("CSV has no header row")
        names = lines[i].split(",")
        if names[:2] != ["t", "rho"]:
            raise ValueError(f"unexpected leading columns {names[:2]}")
        data = [[] for _ in names]
        for line in lines[i + 1:]:
            if not line.strip():
                continue
            parts = line.split(",")
            for dst, val in zip(data, parts):
                dst.append(float(val))
        arrays = [np.array(col) for col in data]
        columns = {name: arr for name, arr in zip(names[2:], arrays[2:])}
        return cls(time=arrays[0], rho=arrays[1], columns=columns, metadata=metadata)
