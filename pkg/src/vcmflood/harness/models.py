"""Method adapters giving the time loop one interface over full-2D, VCM and FBM.

Each adapter builds its model from a :class:`SimulationConfig`, produces the
initial state, advances it, and exposes the laterally resolved surface on
the floodplain plus a 2D channel grid for probes and snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vcmflood.fbm import FBMState, FluxBasedModel
from vcmflood.fv_core import NoWaveSpeedError
from vcmflood.geometry import ChannelGeometry, build_channel_geometry
from vcmflood.grid import OPEN, Block, Mesh2D
from vcmflood.harness import expr
from vcmflood.harness.config import SimulationConfig
from vcmflood.harness.io import Table
from vcmflood.swe1d import ChannelState1D
from vcmflood.swe2d import ConservedState2D, stable_dt_2d, step_2d
from vcmflood.vcm import InvariantViolation, StepInfo, VCMState, VerticalCouplingModel, touches_bank

SNAPSHOT_COLUMNS = ("x", "y", "z_b", "H", "q_x", "q_y", "u", "v")
PROFILE_COLUMNS = ("x", "Z_b", "A", "Q", "eta_bar")


@dataclass(frozen=True)
class Surface:
    """Laterally resolved fields on the floodplain cells followed by the channel grid."""

    x: np.ndarray
    y: np.ndarray
    z_b: np.ndarray
    H: np.ndarray
    q_x: np.ndarray
    q_y: np.ndarray
    channel_shape: tuple[int, int]

    @property
    def eta(self) -> np.ndarray:
        return self.z_b + self.H

    def table(self, h_dry: float) -> Table:
        wet = self.H > h_dry
        safe = np.where(wet, self.H, 1.0)
        u = np.where(wet, self.q_x / safe, 0.0)
        v = np.where(wet, self.q_y / safe, 0.0)
        return Table(SNAPSHOT_COLUMNS, np.column_stack([self.x, self.y, self.z_b, self.H, self.q_x, self.q_y, u, v]))

    def channel(self, values: np.ndarray) -> np.ndarray:
        n = self.channel_shape[0] * self.channel_shape[1]
        return values[len(values) - n:].reshape(self.channel_shape)


def floodplain_blocks(config: SimulationConfig) -> list[Block]:
    return [Block(fp.name, fp.x0, fp.y0, (fp.x1 - fp.x0) / fp.nx, (fp.y1 - fp.y0) / fp.ny, fp.nx, fp.ny,
                  boundary=dict(fp.boundary)) for fp in config.floodplains]


def channel_block(config: SimulationConfig, lateral_cells: int) -> Block:
    ch = config.channel
    return Block("channel", ch.x0, ch.y_south, ch.dx, ch.width / lateral_cells, ch.cells, lateral_cells,
                 boundary=dict(ch.boundary))


def cell_fields(config: SimulationConfig, mesh: Mesh2D, beds: dict[str, str | float]):
    """Bed, depth and discharges at the cell centres of ``mesh``."""
    x, y = mesh.xc, mesh.yc
    bed = np.empty(mesh.n_cells)
    for name, source in beds.items():
        sl = mesh.block_slice(name)
        bed[sl] = expr.evaluate(source, x[sl], y[sl])
    if config.initial_surface is not None:
        H = np.maximum(expr.evaluate(config.initial_surface, x, y) - bed, 0.0)
    else:
        H = expr.evaluate(config.initial_depth, x, y)
    if np.any(H < 0.0):
        raise ValueError("initial depth must be non-negative")
    wet = H > config.h_dry
    qx = np.where(wet, H * expr.evaluate(config.initial_u, x, y), 0.0)
    qy = np.where(wet, H * expr.evaluate(config.initial_v, x, y), 0.0)
    return bed, H, qx, qy


def channel_geometry(config: SimulationConfig) -> ChannelGeometry:
    ch = config.channel
    block = channel_block(config, ch.lateral_cells_upper)
    xc, yc = block.centers()
    bed = expr.evaluate(ch.bed, xc, yc)
    return build_channel_geometry(bed, block.dy, expr.evaluate(ch.wall, xc[:, 0]), x_centers=xc[:, 0],
                                  dx=block.dx, y_south=ch.y_south)


def bank_crest(config: SimulationConfig):
    source = config.channel.bank_elevation
    if source is None:
        return None
    return lambda x: expr.evaluate(source, x)


class MethodAdapter:
    """Common interface used by :func:`vcmflood.harness.runner.run`."""

    method: str

    def __init__(self, config: SimulationConfig):
        self.config = config
        self.fp_blocks = floodplain_blocks(config)
        self.fp_mesh = Mesh2D(self.fp_blocks)
        self.fp_bed, fp_H, fp_qx, fp_qy = cell_fields(config, self.fp_mesh,
                                                      {fp.name: fp.bed for fp in config.floodplains})
        self.fp_initial = ConservedState2D(self.fp_mesh, fp_H, fp_qx, fp_qy, self.fp_bed)
        self.manning = {k: config.manning_for(k) for k in ("channel", "upper", "channel2d", "floodplain")}

    def initial_state(self):
        raise NotImplementedError

    def stable_dt(self, state, cfl: float) -> float:
        return self.model.stable_dt(state, cfl)

    def step(self, state, dt: float):
        return self.model.step(state, dt)

    def total_mass(self, state) -> float:
        return self.model.total_mass(state)

    def masses(self, state) -> tuple[float, float]:
        """Channel and floodplain volumes."""
        return state.channel.mass(), state.floodplain.mass()

    def surface(self, state) -> Surface:
        raise NotImplementedError

    def output_mesh(self) -> Mesh2D:
        """Floodplain blocks plus the channel grid of :meth:`surface`, for probe lookup."""
        raise NotImplementedError

    def audit(self, state, info: StepInfo | None, tol: float = 1e-12) -> None:
        return None

    def extra_tables(self, state, info: StepInfo | None) -> dict[str, Table]:
        return {}

    def flooding_cells(self, state) -> np.ndarray:
        """Channel columns where water stands above the wall."""
        return np.zeros(self.config.channel.cells, bool)

    def channel_full(self, state) -> bool:
        """Whether some channel section is full; methods without layers report ``True``."""
        return True

    def _fp_part(self, fp: ConservedState2D) -> tuple[np.ndarray, ...]:
        return self.fp_mesh.xc, self.fp_mesh.yc, self.fp_bed, fp.H, fp.q_x, fp.q_y


class Full2DAdapter(MethodAdapter):
    """Reference solution: the channel meshed in 2D and joined to the floodplain."""

    method = "full2d"

    def __init__(self, config: SimulationConfig):
        super().__init__(config)
        self.ch_block = channel_block(config, config.channel.lateral_cells_full)
        links = [(b.name, "channel") for b in self.fp_blocks if touches_bank(b, self.ch_block)]
        self.mesh = Mesh2D([*self.fp_blocks, self.ch_block], links)
        beds = {fp.name: fp.bed for fp in config.floodplains}
        beds["channel"] = config.channel.bed
        self.bed, self.H0, self.qx0, self.qy0 = cell_fields(config, self.mesh, beds)
        self.n_fp = self.fp_mesh.n_cells
        self.cell_manning = np.concatenate([np.full(self.n_fp, self.manning["floodplain"]),
                                            np.full(self.ch_block.n_cells, self.manning["channel2d"])])
        self.edge_crest = np.full(self.mesh.n_edges, -np.inf)
        crest = bank_crest(config)
        if crest is not None:
            for link in self.mesh.links:
                fp_cells = self.mesh.edge_left[link.edges] if link.upper == "channel" else self.mesh.edge_right[link.edges]
                self.edge_crest[link.edges] = crest(self.mesh.xc[fp_cells])
        self.open_edges = self.mesh.boundary_edges(OPEN)
        self.open_sign = np.where(self.mesh.edge_right[self.open_edges] < 0, 1.0, -1.0)

    def initial_state(self) -> ConservedState2D:
        return ConservedState2D(self.mesh, self.H0.copy(), self.qx0.copy(), self.qy0.copy(), self.bed)

    def stable_dt(self, state, cfl):
        return stable_dt_2d(state, cfl, g=self.config.gravity, h_dry=self.config.h_dry)

    def step(self, state, dt):
        new, record = step_2d(state, dt, "plain_bed", self.cell_manning, edge_crest=self.edge_crest,
                              g=self.config.gravity, h_dry=self.config.h_dry)
        out = float(dt * np.sum(self.open_sign * record.flux[self.open_edges, 0] * record.length[self.open_edges]))
        return new, StepInfo(dt=dt, boundary_outflow=out, clipped=float(record.clipped.sum()))

    def total_mass(self, state):
        return state.mass()

    def masses(self, state):
        area = self.mesh.area
        return (float(np.sum(state.H[self.n_fp:] * area[self.n_fp:])),
                float(np.sum(state.H[:self.n_fp] * area[:self.n_fp])))

    def surface(self, state) -> Surface:
        return Surface(self.mesh.xc, self.mesh.yc, self.bed, state.H, state.q_x, state.q_y,
                       (self.ch_block.nx, self.ch_block.ny))

    def output_mesh(self):
        return Mesh2D([*self.fp_blocks, self.ch_block])


class VCMAdapter(MethodAdapter):
    method = "vcm"

    def __init__(self, config: SimulationConfig):
        super().__init__(config)
        self.geom = channel_geometry(config)
        self.model = VerticalCouplingModel(self.geom, self.fp_blocks, self.fp_bed, channel_x0=config.channel.x0,
                                           channel_sides=config.channel.boundary, manning=self.manning,
                                           bank_crest=bank_crest(config), g=config.gravity, h_dry=config.h_dry)
        self.ch_block = self.model.upper_block

    def initial_state(self) -> VCMState:
        ch_mesh = Mesh2D([self.ch_block])
        _, H, qx, qy = cell_fields(self.config, ch_mesh, {"channel": self.config.channel.bed})
        shape = (self.ch_block.nx, self.ch_block.ny)
        return self.model.initial_state(H.reshape(shape), qx.reshape(shape), qy.reshape(shape), self.fp_initial)

    def audit(self, state, info, tol=1e-12):
        self.model.audit(state, info, tol)

    def surface(self, state: VCMState) -> Surface:
        full = self.model.channel_field(state)
        xc, yc = self.ch_block.centers()
        parts = zip(self._fp_part(state.floodplain),
                    (xc.ravel(), yc.ravel(), self.geom.z_b_2d.ravel(), full.H.ravel(), full.q_x.ravel(),
                     full.q_y.ravel()))
        return Surface(*(np.concatenate(p) for p in parts), channel_shape=full.H.shape)

    def output_mesh(self):
        return Mesh2D([*self.fp_blocks, Block("channel", self.ch_block.x0, self.ch_block.y0, self.ch_block.dx,
                                              self.ch_block.dy, self.ch_block.nx, self.ch_block.ny)])

    def flooding_cells(self, state: VCMState) -> np.ndarray:
        return (state.upper.h2 > 0.0).any(axis=1)

    def channel_full(self, state: VCMState) -> bool:
        return bool(np.any(state.channel.A >= self.geom.A_c))

    def extra_tables(self, state: VCMState, info: StepInfo | None) -> dict[str, Table]:
        geom = self.geom
        xc, yc = self.ch_block.centers()
        full = self.model.channel_field(state)
        up = state.upper
        tables = {
            "profile1d": profile_table(state.channel),
            "upper": Table(("x", "y", "eta1", "h2", "q2x", "q2y"),
                           np.column_stack([xc.ravel(), yc.ravel(), (geom.z_b_2d + full.h1).ravel(), up.h2.ravel(),
                                            up.q2x.ravel(), up.q2y.ravel()])),
            "channel2d": Table(SNAPSHOT_COLUMNS[:6] + ("h1",),
                               np.column_stack([xc.ravel(), yc.ravel(), geom.z_b_2d.ravel(), full.H.ravel(),
                                                full.q_x.ravel(), full.q_y.ravel(), full.h1.ravel()])),
        }
        if info is not None and info.exchange is not None:
            ex = info.exchange
            # squared mismatch of lower- and upper-layer section velocities, a modelling diagnostic
            a2 = np.sum(up.h2 * geom.lateral_widths, axis=1)
            u2 = np.where(a2 > 0, np.sum(up.q2x * geom.lateral_widths, axis=1) / np.where(a2 > 0, a2, 1.0), 0.0)
            a1 = full.A1
            u1 = np.where(a1 > 0, full.Q1 / np.where(a1 > 0, a1, 1.0), 0.0)
            mismatch = np.where(a2 > 0, (u1 - u2) ** 2, 0.0)
            tables["exchange"] = Table(
                ("x", "y", "S", "u_eta1", "v_eta1", "velocity_mismatch_sq"),
                np.column_stack([xc.ravel(), yc.ravel(), ex.S.ravel(), ex.u_eta1[..., 0].ravel(),
                                 ex.u_eta1[..., 1].ravel(), np.repeat(mismatch, geom.n_lateral)]))
        return tables


class FBMAdapter(MethodAdapter):
    method = "fbm"

    def __init__(self, config: SimulationConfig):
        super().__init__(config)
        self.geom = channel_geometry(config)
        self.model = FluxBasedModel(self.geom, self.fp_blocks, self.fp_bed, channel_x0=config.channel.x0,
                                    channel_sides=config.channel.boundary, manning=self.manning,
                                    bank_crest=bank_crest(config), g=config.gravity, h_dry=config.h_dry)
        self.ch_block = channel_block(config, config.channel.lateral_cells_upper)

    def initial_state(self) -> FBMState:
        ch_mesh = Mesh2D([self.ch_block])
        _, H, qx, _ = cell_fields(self.config, ch_mesh, {"channel": self.config.channel.bed})
        shape = (self.ch_block.nx, self.ch_block.ny)
        dy = self.geom.lateral_widths
        A = np.sum(H.reshape(shape) * dy, axis=1)
        Q = np.sum(qx.reshape(shape) * dy, axis=1)
        return FBMState(ChannelState1D(self.geom, A, Q), self.fp_initial)

    def surface(self, state: FBMState) -> Surface:
        ch = state.channel
        depth = self.geom.depth_field(ch.A)
        qx = depth * ch.velocity(self.config.h_dry)[:, None]
        xc, yc = self.ch_block.centers()
        parts = zip(self._fp_part(state.floodplain),
                    (xc.ravel(), yc.ravel(), self.geom.z_b_2d.ravel(), depth.ravel(), qx.ravel(),
                     np.zeros(depth.size)))
        return Surface(*(np.concatenate(p) for p in parts), channel_shape=depth.shape)

    def output_mesh(self):
        return Mesh2D([*self.fp_blocks, self.ch_block])

    def extra_tables(self, state: FBMState, info) -> dict[str, Table]:
        return {"profile1d": profile_table(state.channel)}


def profile_table(channel: ChannelState1D) -> Table:
    g = channel.geom
    return Table(PROFILE_COLUMNS, np.column_stack([g.x_centers, g.Z_b_1d, channel.A, channel.Q, channel.eta_bar()]))


ADAPTERS = {"full2d": Full2DAdapter, "vcm": VCMAdapter, "fbm": FBMAdapter}


def build_adapter(config: SimulationConfig) -> MethodAdapter:
    config.validate()
    return ADAPTERS[config.method](config)


__all__ = ["ADAPTERS", "build_adapter", "InvariantViolation", "NoWaveSpeedError", "Surface"]
