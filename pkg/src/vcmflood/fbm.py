"""Flux-based coupling baseline.

The channel is 1D everywhere. A ghost row of cells along the channel carries
the channel state to the bank: depth from the area, zero discharge across the
bank and the section velocity along it. Bank fluxes between ghost and
floodplain cells update the floodplain fully and feed only their mass into
the 1D model; the channel never sees lateral momentum.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from vcmflood.fv_core import GRAVITY, H_DRY, NoWaveSpeedError
from vcmflood.geometry import ChannelGeometry
from vcmflood.grid import OPEN, Block, Mesh2D
from vcmflood.swe1d import ChannelState1D, apply_coupling_flux, require_rectangular, stable_dt_1d, step_1d
from vcmflood.swe2d import ConservedState2D, stable_dt_2d, step_2d
from vcmflood.vcm import StepInfo, outward_sign, touches_bank, bank_links, channel_block_for, coupling_from_fluxes


@dataclass(frozen=True)
class FBMState:
    channel: ChannelState1D
    floodplain: ConservedState2D


class FluxBasedModel:
    """1D channel plus 2D floodplain exchanging mass through bank fluxes.

    Arguments mirror :class:`vcmflood.vcm.VerticalCouplingModel`; the manning
    keys used are ``channel`` and ``floodplain``.
    """

    name = "fbm"

    def __init__(self, geom: ChannelGeometry, floodplain_blocks: Sequence[Block], floodplain_bed: np.ndarray, *,
                 channel_x0: float, channel_sides: dict, manning: dict, bank_crest=None,
                 g: float = GRAVITY, h_dry: float = H_DRY):
        require_rectangular(geom)
        self.geom = geom
        self.g = g
        self.h_dry = h_dry
        self.ends = (channel_sides.get("west", "wall"), channel_sides.get("east", "wall"))
        self.manning = dict(manning)
        self.ghost_block = channel_block_for(geom, "channel", channel_x0, channel_sides, ghost=True, lateral_cells=1)
        self.floodplain_mesh = Mesh2D(floodplain_blocks)
        links = [(b.name, "channel") for b in floodplain_blocks if touches_bank(b, self.ghost_block)]
        self.mesh = Mesh2D([*floodplain_blocks, self.ghost_block], links)
        self.n_fp = self.floodplain_mesh.n_cells
        self.fp_bed = np.asarray(floodplain_bed, dtype=float)
        self.bank_edges, self.bank_columns, fp_cells, self.bank_signs = bank_links(self.mesh, "channel")
        self.edge_crest = np.full(self.mesh.n_edges, -np.inf)
        if bank_crest is not None:
            self.edge_crest[self.bank_edges] = bank_crest(self.mesh.xc[fp_cells])
        self.cell_manning = np.concatenate([np.full(self.n_fp, manning.get("floodplain", 0.0)),
                                            np.zeros(geom.n_cells)])
        self.fp_open = np.isin(np.arange(self.mesh.n_edges), self.mesh.boundary_edges(OPEN)) & (
            np.maximum(self.mesh.edge_left, self.mesh.edge_right) < self.n_fp)

    def total_mass(self, state: FBMState) -> float:
        return state.channel.mass() + state.floodplain.mass()

    def stable_dt(self, state: FBMState, cfl: float) -> float:
        rates = []
        for fn in (lambda: stable_dt_1d(state.channel, cfl, g=self.g, h_dry=self.h_dry),
                   lambda: stable_dt_2d(state.floodplain, cfl, g=self.g, h_dry=self.h_dry)):
            try:
                rates.append(fn())
            except NoWaveSpeedError:
                pass
        if not rates:
            raise NoWaveSpeedError("no wet cell")
        return min(rates)

    def ghost_state(self, channel: ChannelState1D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Bank ghost depth, along-bank discharge and bed per channel cell."""
        depth = self.geom.depth_field(channel.A)[:, 0]
        u = channel.velocity(self.h_dry)
        return depth, depth * u, self.geom.Z_b_1d

    def step(self, state: FBMState, dt: float) -> tuple[FBMState, StepInfo]:
        return fbm_step(self, state, dt)

    def audit(self, state: FBMState, info: StepInfo | None, tol: float = 1e-12):
        return None


def fbm_step(model: FluxBasedModel, state: FBMState, dt: float) -> tuple[FBMState, StepInfo]:
    """One coupled step: bank fluxes, floodplain update, then 1D step plus mass exchange."""
    fp = state.floodplain
    depth, q_along, bed = model.ghost_state(state.channel)
    combined = ConservedState2D(
        mesh=model.mesh,
        H=np.concatenate([fp.H, depth]),
        q_x=np.concatenate([fp.q_x, q_along]),
        q_y=np.concatenate([fp.q_y, np.zeros_like(depth)]),
        z_ref=np.concatenate([model.fp_bed, bed]),
    )
    swept, record = step_2d(combined, dt, "plain_bed", model.cell_manning, edge_crest=model.edge_crest,
                            g=model.g, h_dry=model.h_dry)
    coupling = coupling_from_fluxes(record.flux, record.length, model.bank_edges, model.bank_columns,
                                    model.bank_signs, model.geom.dx)
    floodplain = ConservedState2D(model.floodplain_mesh, swept.H[:model.n_fp], swept.q_x[:model.n_fp],
                                  swept.q_y[:model.n_fp], model.fp_bed)
    tilde, rec1 = step_1d(state.channel, dt, model.manning.get("channel", 0.0), ends=model.ends, g=model.g,
                          h_dry=model.h_dry)
    channel = apply_coupling_flux(tilde, coupling.phi_A, np.zeros_like(coupling.phi_A), dt)
    fp_out = float(dt * np.sum(outward_sign(model.mesh, model.fp_open) * record.flux[model.fp_open, 0]
                               * record.length[model.fp_open]))
    info = StepInfo(dt=dt, boundary_outflow=rec1.boundary_outflow + fp_out,
                    clipped=rec1.clipped + float(record.clipped[:model.n_fp].sum()), coupling=coupling)
    return FBMState(channel, floodplain), info
