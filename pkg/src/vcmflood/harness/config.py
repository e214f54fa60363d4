"""Simulation configuration: dataclasses, YAML loading and validation.

All lengths are metres, times seconds. Spatial fields (beds, wall elevation,
initial state) are expressions of ``x`` and ``y``; see
:mod:`vcmflood.harness.expr`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from vcmflood.grid import SIDES
from vcmflood.harness import expr

METHODS = ("full2d", "vcm", "fbm")
MANNING_KEYS = ("channel", "upper", "channel2d", "floodplain")


def _walls() -> dict[str, str]:
    return dict.fromkeys(SIDES, "wall")


@dataclass
class ChannelConfig:
    """Straight channel along x occupying ``[x0, x0 + length] x [y_south, y_south + width]``.

    Attributes:
        cells: Number of cells along the channel (1D model and every 2D channel grid).
        lateral_cells_full: Lateral cells of the full-2D reference grid.
        lateral_cells_upper: Lateral cells of the upper-layer grid.
        bed: Bed elevation expression.
        wall: Wall elevation separating lower and upper layer, expression of x.
        bank_elevation: Physical bank top acting as a weir crest on bank edges.
        boundary: Tag per side of the channel footprint.
    """

    length: float
    width: float
    cells: int
    lateral_cells_full: int
    lateral_cells_upper: int
    wall: str | float
    x0: float = 0.0
    y_south: float = 0.0
    bed: str | float = 0.0
    bank_elevation: str | float | None = None
    boundary: dict[str, str] = field(default_factory=_walls)

    @property
    def dx(self) -> float:
        return self.length / self.cells

    @property
    def y_north(self) -> float:
        return self.y_south + self.width


@dataclass
class FloodplainConfig:
    """Rectangular floodplain grid ``[x0, x1] x [y0, y1]`` with ``nx`` by ``ny`` cells."""

    name: str
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int
    bed: str | float = 0.0
    boundary: dict[str, str] = field(default_factory=_walls)


@dataclass
class SimulationConfig:
    """Everything a run needs.

    The initial depth is ``initial_depth`` or, when ``initial_surface`` is
    given, ``max(surface - bed, 0)``. Manning coefficients default to
    ``manning_n`` and may be overridden per model part (keys ``channel`` for
    the 1D model, ``upper``, ``channel2d`` for the full-2D channel grid and
    ``floodplain``).
    """

    name: str
    method: str
    channel: ChannelConfig
    floodplains: list[FloodplainConfig]
    t_end: float
    initial_depth: str | float = 0.0
    initial_surface: str | float | None = None
    initial_u: str | float = 0.0
    initial_v: str | float = 0.0
    manning_n: float = 0.0
    manning: dict[str, float] = field(default_factory=dict)
    cfl: float = 0.95
    output_times: list[float] = field(default_factory=list)
    probe_interval: float = 0.05
    probes: dict[str, tuple[float, float]] = field(default_factory=dict)
    fallback_dt: float = 0.01
    gravity: float = 9.81
    h_dry: float = 1e-8
    audit: bool = True

    def manning_for(self, part: str) -> float:
        return float(self.manning.get(part, self.manning_n))

    def with_method(self, method: str) -> SimulationConfig:
        return replace(self, method=method)

    def validate(self) -> SimulationConfig:
        """Check ranges and grid conformity; returns ``self`` for chaining."""
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.t_end < 0.0 or self.probe_interval <= 0.0 or self.fallback_dt <= 0.0:
            raise ValueError("t_end must be >= 0 and probe_interval, fallback_dt > 0")
        unknown = set(self.manning) - set(MANNING_KEYS)
        if unknown:
            raise ValueError(f"unknown manning keys {sorted(unknown)}")
        ch = self.channel
        if min(ch.cells, ch.lateral_cells_full, ch.lateral_cells_upper) < 1:
            raise ValueError("channel resolutions must be >= 1")
        if ch.length <= 0 or ch.width <= 0:
            raise ValueError("channel extents must be positive")
        for source in (ch.bed, ch.wall, ch.bank_elevation, self.initial_depth, self.initial_surface,
                       self.initial_u, self.initial_v):
            if source is not None:
                expr.validate(source)
        for fp in self.floodplains:
            if min(fp.nx, fp.ny) < 1 or fp.x1 <= fp.x0 or fp.y1 <= fp.y0:
                raise ValueError(f"floodplain {fp.name!r} has an empty grid")
            expr.validate(fp.bed)
            touches = math.isclose(fp.y1, ch.y_south, abs_tol=1e-9) or math.isclose(fp.y0, ch.y_north, abs_tol=1e-9)
            if touches:
                fp_dx = (fp.x1 - fp.x0) / fp.nx
                shift = (fp.x0 - ch.x0) / ch.dx
                if not math.isclose(fp_dx, ch.dx, rel_tol=1e-12) or abs(shift - round(shift)) > 1e-9:
                    raise ValueError(f"floodplain {fp.name!r} does not conform to the channel cells along the bank")
        for t in self.output_times:
            if not 0.0 <= t <= self.t_end:
                raise ValueError(f"output time {t} outside [0, t_end]")
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        data["probes"] = {k: list(v) for k, v in self.probes.items()}
        return data


def _build(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> SimulationConfig:
    data = dict(data)
    data["channel"] = _build(ChannelConfig, dict(data["channel"]))
    data["floodplains"] = [_build(FloodplainConfig, dict(fp)) for fp in data.get("floodplains", [])]
    data["probes"] = {str(k): (float(v[0]), float(v[1])) for k, v in (data.get("probes") or {}).items()}
    return _build(SimulationConfig, data).validate()


def load_config(path: str | Path) -> SimulationConfig:
    with open(path) as fh:
        return config_from_dict(yaml.safe_load(fh))


def dump_config(config: SimulationConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)
