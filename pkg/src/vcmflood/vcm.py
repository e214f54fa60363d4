"""Vertical coupling of the 1D channel model with a 2D upper channel layer.

Water in a channel section below the wall elevation (the lower layer) is
carried by the 1D model ``(A, Q)``. Water above the wall lives in a 2D upper
layer ``(h2, q2)`` on the lateral channel sub-grid, which shares edges with
the floodplain. One coupled step:

1. sweep the upper layer and floodplain together, the upper layer sitting on
   the apparent topography ``z_b + h1``; bank-edge fluxes give the lateral
   exchange ``phi`` of the channel;
2. advance ``(A, Q)`` with the 1D solver and add ``phi * dt``;
3. split the new total area between the layers again (:func:`reconcile`).

A not-full channel cell has ``h2 = 0`` and an apparent topography equal to its
flat surface, so floodplain water can drain into it over the bank while
channel water cannot leave before the section is full.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from vcmflood.fv_core import GRAVITY, H_DRY, NoWaveSpeedError, SolverError, stable_dt
from vcmflood.geometry import ChannelGeometry
from vcmflood.grid import OPEN, Block, Mesh2D
from vcmflood.swe1d import ChannelState1D, apply_coupling_flux, require_rectangular, stable_dt_1d, step_1d
from vcmflood.swe2d import ConservedState2D, step_2d, stable_dt_2d

GAP_TOL = 1e-12
GAP_MAX_ITER = 10_000


class InvariantViolation(SolverError):
    """A coupled-state invariant failed beyond tolerance."""

    def __init__(self, message: str, cell: int | None = None, step: int | None = None):
        prefix = "" if step is None else f"step {step}: "
        super().__init__(prefix + message, cell)
        self.step = step


@dataclass(frozen=True)
class UpperLayerState:
    """Upper channel layer depth and discharges, each of shape ``(N, Ny)``."""

    h2: np.ndarray
    q2x: np.ndarray
    q2y: np.ndarray

    @classmethod
    def zeros(cls, shape) -> UpperLayerState:
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))


@dataclass(frozen=True)
class ExchangeField:
    """Exchange rate ``S`` (m/s) and interface velocity ``(u, v)`` per sub-cell."""

    S: np.ndarray
    u_eta1: np.ndarray


@dataclass(frozen=True)
class CouplingFlux:
    """Net lateral inflow rates per channel cell: area (m^2/s) and x-momentum (m^3/s^2)."""

    phi_A: np.ndarray
    phi_Q: np.ndarray


@dataclass(frozen=True)
class FullChannel2D:
    """Channel flow reassembled on the lateral sub-grid."""

    H: np.ndarray
    q_x: np.ndarray
    q_y: np.ndarray
    h1: np.ndarray
    A1: np.ndarray
    Q1: np.ndarray


def distribute(H, q_x, q_y, geom: ChannelGeometry, h_dry: float = H_DRY) -> tuple[ChannelState1D, UpperLayerState]:
    """Split laterally resolved channel data into the 1D state and the upper layer.

    ``h1 = min(H, beta)`` and ``h2 = H - h1``; the upper layer takes the
    local velocity, ``q2 = h2 * q / H`` (zero on dry sub-cells).
    """
    H = np.asarray(H, dtype=float)
    q_x = np.asarray(q_x, dtype=float)
    q_y = np.asarray(q_y, dtype=float)
    if np.any(H < 0.0):
        raise ValueError("depths must be non-negative")
    dy = geom.lateral_widths
    A = np.sum(H * dy, axis=1)
    Q = np.sum(q_x * dy, axis=1)
    h1 = np.minimum(H, geom.beta_2d)
    h2 = H - h1
    wet = H > h_dry
    safe = np.where(wet, H, 1.0)
    q2x = np.where(wet & (h2 > 0.0), h2 * q_x / safe, 0.0)
    q2y = np.where(wet & (h2 > 0.0), h2 * q_y / safe, 0.0)
    return ChannelState1D(geom, A, Q), UpperLayerState(h2, q2x, q2y)


@njit(cache=True)
def _reconcile_kernel(A_next, A1_star, Q1_star, h2s, q2xs, q2ys, dt, A_c, B, dy, tol, max_iter, h_dry,
                      h2, q2x, q2y, S, ux, uy):
    n, ny = h2s.shape
    for i in range(n):
        if A_next[i] < A_c[i]:
            for j in range(ny):
                h2[i, j] = 0.0
        elif A1_star[i] >= A_c[i]:
            excess = (A1_star[i] - A_c[i]) / B[i]
            for j in range(ny):
                h2[i, j] = h2s[i, j] + excess
        else:
            gap = A_c[i] - A1_star[i]
            h_gap = gap / B[i]
            for j in range(ny):
                h2[i, j] = h2s[i, j]
            it = 0
            # the height test alone leaves up to tol * B of area behind on wide sections
            while h_gap > tol or gap > tol:
                it += 1
                if it > max_iter:
                    return i
                removed = 0.0
                for j in range(ny):
                    before = h2[i, j]
                    h2[i, j] = max(0.0, before - h_gap)
                    taken = abs(h2[i, j] - before) * dy[i, j]
                    gap -= taken
                    removed += taken
                h_gap = gap / B[i]
                if removed == 0.0:
                    # nothing left to remove: the residual is round-off of A - A_c
                    if h_gap > 1e3 * tol:
                        return i
                    break
        # lower layer velocity only matters where S > 0, which needs A1* > A_c >= 0
        u_low = Q1_star[i] / A1_star[i] if A1_star[i] > 0.0 else 0.0
        for j in range(ny):
            hs = h2s[i, j]
            hn = h2[i, j]
            s = (hn - hs) / dt
            S[i, j] = s
            if s <= 0.0:
                if hs > h_dry:
                    ux[i, j] = q2xs[i, j] / hs
                    uy[i, j] = q2ys[i, j] / hs
                    # equals q2* + u * S * dt, written to keep q2 = 0 exact when h2 = 0
                    ratio = hn / hs
                    q2x[i, j] = q2xs[i, j] * ratio
                    q2y[i, j] = q2ys[i, j] * ratio
                else:
                    ux[i, j] = 0.0
                    uy[i, j] = 0.0
                    q2x[i, j] = 0.0 if hn <= 0.0 else q2xs[i, j]
                    q2y[i, j] = 0.0 if hn <= 0.0 else q2ys[i, j]
            else:
                ux[i, j] = u_low
                uy[i, j] = 0.0
                q2x[i, j] = q2xs[i, j] + u_low * (hn - hs)
                q2y[i, j] = q2ys[i, j]
    return -1


def reconcile(
    A_next: np.ndarray,
    A1_star: np.ndarray,
    Q1_star: np.ndarray,
    upper_star: UpperLayerState,
    dt: float,
    geom: ChannelGeometry,
    *,
    tol: float = GAP_TOL,
    max_iter: int = GAP_MAX_ITER,
    h_dry: float = H_DRY,
) -> tuple[UpperLayerState, ExchangeField, np.ndarray]:
    """Redistribute the new channel area between the lower and upper layer.

    Arguments:
        A_next: Total area after the 1D step and lateral exchange.
        A1_star: Intermediate lower-layer area ``A_next - sum(h2* dy)``.
        Q1_star: Intermediate lower-layer discharge ``Q_next - sum(q2x* dy)``.
        upper_star: Upper layer after the 2D sweep.
        dt: Step size.
        geom: Channel geometry.

    Returns:
        The new upper layer, the exchange field, and the new lower-layer discharge.

    Three cases per section:

    * ``A_next < A_c``: the section is not full and the upper layer empties.
    * ``A1_star >= A_c``: the surplus ``(A1_star - A_c) / B`` is added to every sub-cell.
    * otherwise the gap ``A_c - A1_star`` is removed from the upper layer in
      repeated uniform passes (clipped at zero) until both the residual gap
      height and the residual gap area are at most ``tol``.

    Raises:
        SolverError: if the gap removal does not converge within ``max_iter`` passes.
    """
    A_next = np.asarray(A_next, dtype=float)
    A1_star = np.asarray(A1_star, dtype=float)
    Q1_star = np.asarray(Q1_star, dtype=float)
    if np.any(A_next < 0.0):
        raise ValueError("total area must be non-negative")
    shape = upper_star.h2.shape
    h2, q2x, q2y, S, ux, uy = (np.empty(shape) for _ in range(6))
    failed = _reconcile_kernel(A_next, A1_star, Q1_star, upper_star.h2, upper_star.q2x, upper_star.q2y, float(dt),
                               geom.A_c, geom.B_top, geom.lateral_widths, tol, max_iter, h_dry,
                               h2, q2x, q2y, S, ux, uy)
    if failed >= 0:
        raise SolverError(f"upper-layer gap removal did not converge (A_c - A1* = "
                          f"{geom.A_c[failed] - A1_star[failed]:.3e})", int(failed))
    Q1_next = Q1_star + np.sum((upper_star.q2x - q2x) * geom.lateral_widths, axis=1)
    exchange = ExchangeField(S=S, u_eta1=np.stack([ux, uy], axis=-1))
    return UpperLayerState(h2, q2x, q2y), exchange, Q1_next


def lower_layer_discharge(channel: ChannelState1D, upper: UpperLayerState) -> np.ndarray:
    return channel.Q - np.sum(upper.q2x * channel.geom.lateral_widths, axis=1)


def assemble_full(A1, Q1, upper: UpperLayerState, geom: ChannelGeometry, h_dry: float = H_DRY) -> FullChannel2D:
    """Rebuild laterally resolved ``(H, q_x, q_y)`` from the two layers.

    ``H = h1 + h2`` with ``h1`` the flat-surface depth of ``A1``;
    ``q_x = h1 Q1/A1 + q2x``; ``q_y = H v`` with ``v = q2y/h2`` (0 where ``h2 = 0``).
    """
    A1 = np.asarray(A1, dtype=float)
    Q1 = np.asarray(Q1, dtype=float)
    h1 = geom.depth_field(A1)
    H = h1 + upper.h2
    wet1 = A1 > h_dry * geom.B_top
    u1 = np.where(wet1, Q1 / np.where(wet1, A1, 1.0), 0.0)
    q_x = h1 * u1[:, None] + upper.q2x
    has_upper = upper.h2 > 0.0
    v = np.where(has_upper, upper.q2y / np.where(has_upper, upper.h2, 1.0), 0.0)
    return FullChannel2D(H=H, q_x=q_x, q_y=H * v, h1=h1, A1=A1, Q1=Q1)


def check_invariants(channel: ChannelState1D, upper: UpperLayerState, Q1: np.ndarray, *, tol: float = 1e-12,
                     gap_tol: float = GAP_TOL, h_dry: float = H_DRY) -> FullChannel2D:
    """Verify the layer invariants of a coupled state and return its reassembly.

    Checks: the layers never overlap (``(beta - h1) h2 = 0``); without an upper
    layer there is no lateral flow and the velocity is the lower-layer one;
    a section whose surface dips below the wall is laterally flat; ``A1 =
    min(A, A_c)``; and the local area and discharge identities.

    Raises:
        InvariantViolation: naming the first offending channel cell.
    """
    geom = channel.geom
    A1 = channel.A1
    full = assemble_full(A1, Q1, upper, geom, h_dry)
    dy = geom.lateral_widths

    def fail(name, mask):
        i = int(np.argmax(mask.any(axis=1) if mask.ndim == 2 else mask))
        raise InvariantViolation(f"{name} violated", i)

    overlap = np.abs((geom.beta_2d - full.h1) * upper.h2) > tol
    if overlap.any():
        fail("layer overlap", overlap)
    none = upper.h2 == 0.0
    wet = full.H > h_dry
    u1 = np.where(A1 > h_dry * geom.B_top, Q1 / np.where(A1 > 0, A1, 1.0), 0.0)
    u_cell = np.where(wet, full.q_x / np.where(wet, full.H, 1.0), 0.0)
    lateral = none & ((np.abs(upper.q2x) > tol) | (np.abs(full.q_y) > tol)
                      | (wet & (np.abs(u_cell - u1[:, None]) > tol * np.maximum(1.0, np.abs(u1[:, None])))))
    if lateral.any():
        fail("no-upper-layer flow", lateral)
    eta = geom.z_b_2d + full.H
    eta_wet = np.where(full.H > 0.0, eta, np.nan)
    below = (eta < geom.eta_beta[:, None] - tol).any(axis=1)
    spread = np.nanmax(eta_wet, axis=1, initial=-np.inf) - np.nanmin(eta_wet, axis=1, initial=np.inf)
    uneven = below & (spread > tol)
    if uneven.any():
        fail("laterally flat surface below the wall", uneven)
    if np.any(A1 != np.minimum(channel.A, geom.A_c)):
        fail("lower-layer area identity", A1 != np.minimum(channel.A, geom.A_c))
    upper_area = np.sum(upper.h2 * dy, axis=1)
    area_tol = np.maximum(tol * np.abs(channel.A), gap_tol * geom.B_top)
    bad_area = np.abs(channel.A - A1 - upper_area) > area_tol
    if bad_area.any():
        fail("local area identity", bad_area)
    upper_q = np.sum(upper.q2x * dy, axis=1)
    scale = np.maximum.reduce([np.abs(channel.Q), np.abs(Q1), np.sum(np.abs(upper.q2x) * dy, axis=1)])
    bad_q = np.abs(channel.Q - Q1 - upper_q) > tol * np.maximum(scale, 1e-300)
    if bad_q.any():
        fail("local discharge identity", bad_q)
    return full


@dataclass(frozen=True)
class VCMState:
    channel: ChannelState1D
    upper: UpperLayerState
    floodplain: ConservedState2D


@dataclass(frozen=True)
class StepInfo:
    """Per-step bookkeeping shared by all coupling models."""

    dt: float
    boundary_outflow: float
    clipped: float
    exchange: ExchangeField | None = None
    coupling: CouplingFlux | None = None
    Q1: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def bank_links(mesh: Mesh2D, channel: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Bank edges of block ``channel`` in ``mesh``.

    Returns edge ids, channel column per edge, floodplain cell per edge, and
    the orientation sign (+1 when the edge normal points into the channel).
    """
    ids, cols, fp_cells, signs = [], [], [], []
    for link in mesh.links:
        if link.upper == channel:
            ids.append(link.edges)
            cols.append(link.upper_columns)
            fp_cells.append(mesh.edge_left[link.edges])
            signs.append(np.ones(len(link.edges)))
        elif link.lower == channel:
            ids.append(link.edges)
            cols.append(link.lower_columns)
            fp_cells.append(mesh.edge_right[link.edges])
            signs.append(-np.ones(len(link.edges)))
    if not ids:
        empty = np.zeros(0, np.int64)
        return empty, empty, empty, np.zeros(0)
    return (np.concatenate(ids), np.concatenate(cols), np.concatenate(fp_cells), np.concatenate(signs))


def coupling_from_fluxes(flux: np.ndarray, length: np.ndarray, edges, columns, signs, dx: np.ndarray) -> CouplingFlux:
    """Sum bank-edge mass and x-momentum fluxes into per-cell inflow rates."""
    n = len(dx)
    phi_A = np.zeros(n)
    phi_Q = np.zeros(n)
    np.add.at(phi_A, columns, signs * flux[edges, 0] * length[edges])
    np.add.at(phi_Q, columns, signs * flux[edges, 1] * length[edges])
    return CouplingFlux(phi_A / dx, phi_Q / dx)


def channel_block_for(geom: ChannelGeometry, name: str, x0: float, boundary, *, ghost: bool = False,
                      lateral_cells: int | None = None) -> Block:
    """Uniform 2D block covering the channel footprint of ``geom``."""
    dx = geom.dx[0]
    widths = geom.lateral_widths
    if not (np.allclose(geom.dx, dx, rtol=1e-12) and np.allclose(widths, widths[0, 0], rtol=1e-12)):
        raise ValueError("the 2D channel sub-grid must be uniform")
    ny = geom.n_lateral if lateral_cells is None else lateral_cells
    dy = geom.B_top[0] / ny
    return Block(name, x0, geom.y_south, dx, dy, geom.n_cells, ny, boundary=dict(boundary), ghost=ghost)


class VerticalCouplingModel:
    """Coupled channel and floodplain stepping with the two-layer channel.

    Arguments:
        geom: Channel geometry (rectangular sections on a uniform sub-grid).
        floodplain_blocks: Floodplain grids; blocks touching the channel
            footprint are joined to the upper layer along the bank.
        floodplain_bed: Bed elevation on the floodplain cells (flat, in block order).
        channel_x0: Upstream end of the channel.
        channel_sides: Boundary tags of the channel footprint
            (``west``/``east`` also set the 1D end conditions).
        manning: Manning coefficients keyed ``channel``, ``upper``, ``floodplain``.
        bank_crest: Optional crest elevation per bank edge (physical bank top).
    """

    name = "vcm"

    def __init__(self, geom: ChannelGeometry, floodplain_blocks: Sequence[Block], floodplain_bed: np.ndarray, *,
                 channel_x0: float, channel_sides: dict, manning: dict, bank_crest=None,
                 g: float = GRAVITY, h_dry: float = H_DRY):
        require_rectangular(geom)
        self.geom = geom
        self.g = g
        self.h_dry = h_dry
        self.ends = (channel_sides.get("west", "wall"), channel_sides.get("east", "wall"))
        self.manning = dict(manning)
        self.upper_block = channel_block_for(geom, "channel", channel_x0, channel_sides)
        self.floodplain_mesh = Mesh2D(floodplain_blocks)
        links = [(b.name, "channel") for b in floodplain_blocks if touches_bank(b, self.upper_block)]
        self.mesh = Mesh2D([*floodplain_blocks, self.upper_block], links)
        self.n_fp = self.floodplain_mesh.n_cells
        self.fp_bed = np.asarray(floodplain_bed, dtype=float)
        self.bank_edges, self.bank_columns, self.bank_fp_cells, self.bank_signs = bank_links(self.mesh, "channel")
        self.edge_crest = np.full(self.mesh.n_edges, -np.inf)
        if bank_crest is not None:
            self.edge_crest[self.bank_edges] = bank_crest(self.mesh.xc[self.bank_fp_cells])
        self.cell_manning = np.concatenate([np.full(self.n_fp, manning.get("floodplain", 0.0)),
                                            np.full(geom.n_cells * geom.n_lateral, manning.get("upper", 0.0))])
        self.fp_open = np.isin(np.arange(self.mesh.n_edges), self.mesh.boundary_edges(OPEN)) & (
            np.maximum(self.mesh.edge_left, self.mesh.edge_right) < self.n_fp)

    def initial_state(self, H_channel, qx_channel, qy_channel, floodplain: ConservedState2D) -> VCMState:
        channel, upper = distribute(H_channel, qx_channel, qy_channel, self.geom, self.h_dry)
        return VCMState(channel, upper, floodplain)

    def total_mass(self, state: VCMState) -> float:
        return state.channel.mass() + state.floodplain.mass()

    def stable_dt(self, state: VCMState, cfl: float) -> float:
        rates = []
        for fn in (lambda: stable_dt_1d(state.channel, cfl, g=self.g, h_dry=self.h_dry),
                   lambda: stable_dt_2d(state.floodplain, cfl, g=self.g, h_dry=self.h_dry),
                   lambda: self._upper_dt(state.upper, cfl)):
            try:
                rates.append(fn())
            except NoWaveSpeedError:
                pass
        if not rates:
            raise NoWaveSpeedError("no wet cell")
        return min(rates)

    def _upper_dt(self, upper: UpperLayerState, cfl: float) -> float:
        h = upper.h2.ravel()
        wet = h > self.h_dry
        u = np.where(wet, upper.q2x.ravel() / np.where(wet, h, 1.0), 0.0)
        v = np.where(wet, upper.q2y.ravel() / np.where(wet, h, 1.0), 0.0)
        b = self.upper_block
        return stable_dt(h, u, b.dx, cfl, v=v, dy=b.dy, g=self.g, h_dry=self.h_dry)

    def step(self, state: VCMState, dt: float) -> tuple[VCMState, StepInfo]:
        geom = self.geom
        ch = state.channel
        h1 = geom.depth_field(ch.A1)
        apparent = geom.z_b_2d + h1
        up = state.upper
        fp = state.floodplain
        combined = ConservedState2D(
            mesh=self.mesh,
            H=np.concatenate([fp.H, up.h2.ravel()]),
            q_x=np.concatenate([fp.q_x, up.q2x.ravel()]),
            q_y=np.concatenate([fp.q_y, up.q2y.ravel()]),
            z_ref=np.concatenate([self.fp_bed, apparent.ravel()]),
        )
        offset = np.concatenate([np.zeros(self.n_fp), h1.ravel()])
        swept, record = step_2d(combined, dt, "apparent_topography", self.cell_manning, depth_offset=offset,
                                edge_crest=self.edge_crest, g=self.g, h_dry=self.h_dry)
        coupling = coupling_from_fluxes(record.flux, record.length, self.bank_edges, self.bank_columns,
                                        self.bank_signs, geom.dx)
        shape = up.h2.shape
        upper_star = UpperLayerState(swept.H[self.n_fp:].reshape(shape), swept.q_x[self.n_fp:].reshape(shape),
                                     swept.q_y[self.n_fp:].reshape(shape))
        floodplain = ConservedState2D(self.floodplain_mesh, swept.H[:self.n_fp], swept.q_x[:self.n_fp],
                                      swept.q_y[:self.n_fp], self.fp_bed)

        tilde, rec1 = step_1d(ch, dt, self.manning.get("channel", 0.0), ends=self.ends, g=self.g, h_dry=self.h_dry)
        channel = apply_coupling_flux(tilde, coupling.phi_A, coupling.phi_Q, dt)

        dy = geom.lateral_widths
        A1_star = channel.A - np.sum(upper_star.h2 * dy, axis=1)
        Q1_star = channel.Q - np.sum(upper_star.q2x * dy, axis=1)
        upper, exchange, Q1 = reconcile(channel.A, A1_star, Q1_star, upper_star, dt, geom, h_dry=self.h_dry)

        fp_out = float(dt * np.sum(outward_sign(self.mesh, self.fp_open) * record.flux[self.fp_open, 0]
                                   * record.length[self.fp_open]))
        info = StepInfo(dt=dt, boundary_outflow=rec1.boundary_outflow + fp_out,
                        clipped=rec1.clipped + float(record.clipped[:self.n_fp].sum()),
                        exchange=exchange, coupling=coupling, Q1=Q1)
        return VCMState(channel, upper, floodplain), info

    def audit(self, state: VCMState, info: StepInfo | None, tol: float = 1e-12) -> FullChannel2D:
        Q1 = lower_layer_discharge(state.channel, state.upper) if info is None or info.Q1 is None else info.Q1
        return check_invariants(state.channel, state.upper, Q1, tol=tol, h_dry=self.h_dry)

    def channel_field(self, state: VCMState) -> FullChannel2D:
        return assemble_full(state.channel.A1, lower_layer_discharge(state.channel, state.upper), state.upper,
                             self.geom, self.h_dry)


def touches_bank(block: Block, channel: Block) -> bool:
    horizontal = np.isclose(block.y1, channel.y0, atol=1e-9) or np.isclose(block.y0, channel.y1, atol=1e-9)
    return bool(horizontal and block.x0 < channel.x1 and channel.x0 < block.x1)


def outward_sign(mesh: Mesh2D, edges: np.ndarray) -> np.ndarray:
    """+1 where the boundary edge's missing cell is on its right side, else -1."""
    return np.where(mesh.edge_right[edges] < 0, 1.0, -1.0)
