"""CSV tables with fixed headers.

Snapshots are written as ``{method}_{time}.csv`` with columns
``x, y, z_b, H, q_x, q_y, u, v``; coupled methods add
``{method}_{time}_{part}.csv`` files for their channel sub-models.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise ValueError(f"table data of shape {self.data.shape} does not match {len(self.columns)} columns")

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def time_label(t: float) -> str:
    return f"{t:.3f}"


def snapshot_name(method: str, t: float, part: str | None = None) -> str:
    suffix = "" if part is None else f"_{part}"
    return f"{method}_{time_label(t)}{suffix}.csv"


def write_table(table: Table, path: str | Path) -> None:
    # repr-precision floats keep reruns and reloads bit-identical
    np.savetxt(path, table.data, delimiter=",", header=",".join(table.columns), comments="", fmt="%.17g")


def read_table(path: str | Path) -> Table:
    with open(path) as fh:
        columns = tuple(fh.readline().strip().split(","))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(columns)))
    return Table(columns, data)
