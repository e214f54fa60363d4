"""Structured multi-block meshes flattened to a cell list and an edge list.

A mesh is a set of axis-aligned rectangular blocks. Blocks that touch along a
horizontal line (one block's north row against another's south row) are
joined by conforming link edges; every other block side is a boundary tagged
``wall`` (reflective) or ``open`` (zero gradient). Ghost blocks carry no
interior or boundary edges: their cells only feed link edges and are never
updated by the sweep.

Cell ``(i, j)`` of a block lives at ``offset + i * ny + j``. Every edge stores
a ``left`` and ``right`` cell with the normal pointing from left to right;
``-1`` marks the missing side of a boundary edge.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

SIDES = ("west", "east", "south", "north")
WALL, OPEN, INTERIOR = 0, 1, 2
_TAGS = {"wall": WALL, "open": OPEN}


def _default_boundary() -> dict[str, str]:
    return dict.fromkeys(SIDES, "wall")


@dataclass(frozen=True)
class Block:
    """A uniform rectangular grid of ``nx`` by ``ny`` cells."""

    name: str
    x0: float
    y0: float
    dx: float
    dy: float
    nx: int
    ny: int
    boundary: Mapping[str, str] = field(default_factory=_default_boundary)
    ghost: bool = False

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"block {self.name!r} needs at least one cell per direction")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError(f"block {self.name!r} needs positive spacings")
        unknown = set(self.boundary) - set(SIDES)
        if unknown:
            raise ValueError(f"unknown sides {sorted(unknown)}")
        for side, tag in self.boundary.items():
            if tag not in _TAGS:
                raise ValueError(f"side {side!r} of {self.name!r}: tag must be 'wall' or 'open'")

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def x1(self) -> float:
        return self.x0 + self.nx * self.dx

    @property
    def y1(self) -> float:
        return self.y0 + self.ny * self.dy

    def tag(self, side: str) -> int:
        return _TAGS[self.boundary.get(side, "wall")]

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates, each of shape ``(nx, ny)``."""
        xc = self.x0 + (np.arange(self.nx) + 0.5) * self.dx
        yc = self.y0 + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(xc, yc, indexing="ij")


@dataclass(frozen=True)
class Link:
    """Conforming edges between a lower block's north row and an upper block's south row."""

    lower: str
    upper: str
    edges: np.ndarray
    lower_columns: np.ndarray
    upper_columns: np.ndarray


class Mesh2D:
    """Blocks plus the flattened cell and edge tables used by the sweeps."""

    def __init__(self, blocks: Sequence[Block], links: Sequence[tuple[str, str]] = ()):
        names = [b.name for b in blocks]
        if len(set(names)) != len(names):
            raise ValueError("block names must be unique")
        self.blocks = {b.name: b for b in blocks}
        self.offsets: dict[str, int] = {}
        total = 0
        for b in blocks:
            self.offsets[b.name] = total
            total += b.n_cells
        self.n_cells = total

        self.cell_dx = np.concatenate([np.full(b.n_cells, b.dx) for b in blocks])
        self.cell_dy = np.concatenate([np.full(b.n_cells, b.dy) for b in blocks])
        self.area = self.cell_dx * self.cell_dy
        self.ghost = np.concatenate([np.full(b.n_cells, b.ghost) for b in blocks])
        xs, ys = zip(*(b.centers() for b in blocks))
        self.xc = np.concatenate([x.ravel() for x in xs])
        self.yc = np.concatenate([y.ravel() for y in ys])

        parts: list[tuple[np.ndarray, ...]] = []
        linked: dict[tuple[str, str], np.ndarray] = {}
        pending_links = []
        for pair in links:
            lower, upper = self._orient(*pair)
            lo_cols, up_cols = self._match_columns(self.blocks[lower], self.blocks[upper])
            linked.setdefault((lower, "north"), np.zeros(self.blocks[lower].nx, bool))[lo_cols] = True
            linked.setdefault((upper, "south"), np.zeros(self.blocks[upper].nx, bool))[up_cols] = True
            pending_links.append((lower, upper, lo_cols, up_cols))

        for b in blocks:
            if not b.ghost:
                parts.extend(self._block_edges(b, linked))
        n_before = sum(len(p[0]) for p in parts)
        self.links: list[Link] = []
        for lower, upper, lo_cols, up_cols in pending_links:
            lb, ub = self.blocks[lower], self.blocks[upper]
            left = self.offsets[lower] + lo_cols * lb.ny + (lb.ny - 1)
            right = self.offsets[upper] + up_cols * ub.ny
            n = len(left)
            parts.append((left, right, np.ones(n, np.int64), np.full(n, ub.dx), np.full(n, INTERIOR, np.int64)))
            ids = np.arange(n_before, n_before + n)
            n_before += n
            self.links.append(Link(lower, upper, ids, lo_cols, up_cols))

        if parts:
            cols = [np.concatenate(c) for c in zip(*parts)]
        else:
            cols = [np.zeros(0, np.int64)] * 2 + [np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64)]
        self.edge_left = cols[0].astype(np.int64)
        self.edge_right = cols[1].astype(np.int64)
        self.edge_axis = cols[2].astype(np.int64)
        self.edge_length = cols[3].astype(float)
        self.edge_tag = cols[4].astype(np.int64)
        self.n_edges = len(self.edge_left)

    def _orient(self, a: str, b: str) -> tuple[str, str]:
        ba, bb = self.blocks[a], self.blocks[b]
        if np.isclose(ba.y1, bb.y0, rtol=0, atol=1e-9):
            return a, b
        if np.isclose(bb.y1, ba.y0, rtol=0, atol=1e-9):
            return b, a
        raise ValueError(f"blocks {a!r} and {b!r} do not touch along a horizontal line")

    @staticmethod
    def _match_columns(lower: Block, upper: Block) -> tuple[np.ndarray, np.ndarray]:
        if not np.isclose(lower.dx, upper.dx, rtol=1e-12, atol=0):
            raise ValueError(f"non-conforming x spacing between {lower.name!r} and {upper.name!r}")
        shift = (upper.x0 - lower.x0) / lower.dx
        k = round(shift)
        if abs(shift - k) > 1e-9:
            raise ValueError(f"non-conforming x faces between {lower.name!r} and {upper.name!r}")
        up_cols = np.arange(upper.nx)
        lo_cols = up_cols + k
        keep = (lo_cols >= 0) & (lo_cols < lower.nx)
        if not np.any(keep):
            raise ValueError(f"blocks {lower.name!r} and {upper.name!r} do not overlap")
        return lo_cols[keep].astype(np.int64), up_cols[keep].astype(np.int64)

    def _block_edges(self, b: Block, linked) -> list[tuple[np.ndarray, ...]]:
        off = self.offsets[b.name]
        idx = off + np.arange(b.n_cells).reshape(b.nx, b.ny)
        out = []

        def add(left, right, axis, length, tag):
            left = np.asarray(left, np.int64).ravel()
            right = np.asarray(right, np.int64).ravel()
            n = max(len(left), len(right))
            out.append((left, right, np.full(n, axis, np.int64), np.full(n, length), np.full(n, tag, np.int64)))

        add(idx[:-1, :], idx[1:, :], 0, b.dy, INTERIOR)
        add(idx[:, :-1], idx[:, 1:], 1, b.dx, INTERIOR)
        none_y = np.full(b.ny, -1)
        add(none_y, idx[0, :], 0, b.dy, b.tag("west"))
        add(idx[-1, :], none_y, 0, b.dy, b.tag("east"))
        south = ~linked.get((b.name, "south"), np.zeros(b.nx, bool))
        north = ~linked.get((b.name, "north"), np.zeros(b.nx, bool))
        add(np.full(south.sum(), -1), idx[south, 0], 1, b.dx, b.tag("south"))
        add(idx[north, -1], np.full(north.sum(), -1), 1, b.dx, b.tag("north"))
        return out

    def block_slice(self, name: str) -> slice:
        off = self.offsets[name]
        return slice(off, off + self.blocks[name].n_cells)

    def view(self, name: str, values: np.ndarray) -> np.ndarray:
        """Reshape the part of a per-cell array belonging to block ``name``."""
        b = self.blocks[name]
        return values[self.block_slice(name)].reshape(b.nx, b.ny)

    def locate(self, x: float, y: float) -> int:
        """Index of the non-ghost cell containing ``(x, y)``, or ``-1``."""
        for b in self.blocks.values():
            if b.ghost:
                continue
            if b.x0 <= x <= b.x1 and b.y0 <= y <= b.y1:
                i = min(int((x - b.x0) / b.dx), b.nx - 1)
                j = min(int((y - b.y0) / b.dy), b.ny - 1)
                return self.offsets[b.name] + i * b.ny + j
        return -1

    def boundary_edges(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.edge_tag == tag)
