"""First-order well-balanced finite-volume solver for the 2D shallow water equations.

The same sweep serves the floodplain and the full-2D reference channel (bed
topography) and the upper channel layer, whose reference topography is the
apparent bed ``z_b + h1`` supplied by the coupler.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from vcmflood.fv_core import GRAVITY, H_DRY, SolverError, hll_kernel, hydrostatic_kernel, stable_dt
from vcmflood.grid import OPEN, WALL, Mesh2D

MODES = ("plain_bed", "apparent_topography")


@dataclass(frozen=True)
class ConservedState2D:
    """Depth and discharges on every cell of ``mesh`` over reference level ``z_ref``."""

    mesh: Mesh2D
    H: np.ndarray
    q_x: np.ndarray
    q_y: np.ndarray
    z_ref: np.ndarray

    def velocities(self, h_dry: float = H_DRY) -> tuple[np.ndarray, np.ndarray]:
        wet = self.H > h_dry
        safe = np.where(wet, self.H, 1.0)
        return np.where(wet, self.q_x / safe, 0.0), np.where(wet, self.q_y / safe, 0.0)

    def mass(self) -> float:
        """Water volume on the non-ghost cells."""
        live = ~self.mesh.ghost
        return float(np.sum(self.H[live] * self.mesh.area[live]))

    def surface(self) -> np.ndarray:
        return self.z_ref + self.H


@dataclass(frozen=True)
class EdgeFluxRecord:
    """Fluxes of the most recent step.

    Attributes:
        flux: Per-edge ``(f_h, f_x, f_y)`` per unit edge length, x-y frame,
            oriented from the edge's left cell to its right cell.
        length: Edge lengths.
        dt: Step size the fluxes were applied with.
        clipped: Volume added per cell by clipping negative depths to zero.
    """

    flux: np.ndarray
    length: np.ndarray
    dt: float
    clipped: np.ndarray

    def boundary_outflow(self, mesh: Mesh2D) -> float:
        """Volume leaving through open boundary edges during the step."""
        out = mesh.edge_right[mesh.edge_tag == OPEN] < 0
        ids = np.flatnonzero(mesh.edge_tag == OPEN)
        sign = np.where(out, 1.0, -1.0)
        return float(self.dt * np.sum(sign * self.flux[ids, 0] * self.length[ids]))


@njit(cache=True)
def _sweep(h, qx, qy, z, left, right, axis, length, tag, crest, g, h_dry, flux, acc):
    """Accumulate edge contributions into ``acc`` (net outflow per cell).

    The momentum contribution to a cell is split as
    ``(f_n - g/2 h~^2) + g/2 h^2``: with equal states the first bracket
    vanishes exactly, and the pressure terms of opposite faces cancel
    exactly, so a lake at rest is a bitwise fixed point.
    """
    acc[:, :] = 0.0
    for e in range(left.shape[0]):
        l = left[e]
        r = right[e]
        ax = axis[e]
        hl = zl = qnl = qtl = 0.0
        hr = zr = qnr = qtr = 0.0
        if l >= 0:
            hl = h[l]
            zl = z[l]
            if ax == 0:
                qnl = qx[l]
                qtl = qy[l]
            else:
                qnl = qy[l]
                qtl = -qx[l]
        if r >= 0:
            hr = h[r]
            zr = z[r]
            if ax == 0:
                qnr = qx[r]
                qtr = qy[r]
            else:
                qnr = qy[r]
                qtr = -qx[r]
        if l < 0:
            hl = hr
            zl = zr
            qtl = qtr
            qnl = -qnr if tag[e] == WALL else qnr
        if r < 0:
            hr = hl
            zr = zl
            qtr = qtl
            qnr = -qnl if tag[e] == WALL else qnl
        if hl <= 0.0 and hr <= 0.0:
            flux[e, 0] = 0.0
            flux[e, 1] = 0.0
            flux[e, 2] = 0.0
            continue
        htl, htr, zs = hydrostatic_kernel(zl, hl, zr, hr)
        if crest[e] > zs:
            htl = max(hl - (crest[e] - zl), 0.0)
            htr = max(hr - (crest[e] - zr), 0.0)
        fl = htl / hl if hl > 0.0 else 0.0
        fr = htr / hr if hr > 0.0 else 0.0
        fh, fn, ft = hll_kernel(htl, qnl * fl, qtl * fl, htr, qnr * fr, qtr * fr, g, h_dry)
        if ax == 0:
            flux[e, 0] = fh
            flux[e, 1] = fn
            flux[e, 2] = ft
        else:
            flux[e, 0] = fh
            flux[e, 1] = -ft
            flux[e, 2] = fn
        ln = length[e]
        if l >= 0:
            mn = (fn - 0.5 * g * htl * htl) + 0.5 * g * hl * hl
            acc[l, 0] += ln * fh
            if ax == 0:
                acc[l, 1] += ln * mn
                acc[l, 2] += ln * ft
            else:
                acc[l, 1] -= ln * ft
                acc[l, 2] += ln * mn
        if r >= 0:
            mn = (fn - 0.5 * g * htr * htr) + 0.5 * g * hr * hr
            acc[r, 0] -= ln * fh
            if ax == 0:
                acc[r, 1] -= ln * mn
                acc[r, 2] -= ln * ft
            else:
                acc[r, 1] += ln * ft
                acc[r, 2] -= ln * mn


def apply_friction(state: ConservedState2D, dt: float, manning_n, *, depth_offset=None, g: float = GRAVITY,
                   h_dry: float = H_DRY) -> ConservedState2D:
    """Semi-implicit Manning friction ``q <- q / (1 + dt g n^2 |u| / D^(4/3))``.

    The flow depth is ``D = H + depth_offset``; the offset lets the upper
    channel layer feel the whole water column above the bed.
    """
    n = np.broadcast_to(np.asarray(manning_n, dtype=float), state.H.shape)
    if np.any(n < 0.0):
        raise ValueError("manning coefficient must be non-negative")
    d = state.H if depth_offset is None else state.H + depth_offset
    active = (state.H > h_dry) & (n > 0.0) & ~state.mesh.ghost
    if not np.any(active):
        return state
    u, v = state.velocities(h_dry)
    speed = np.hypot(u[active], v[active])
    div = 1.0 + dt * g * n[active] ** 2 * speed / d[active] ** (4.0 / 3.0)
    qx = state.q_x.copy()
    qy = state.q_y.copy()
    qx[active] /= div
    qy[active] /= div
    return replace(state, q_x=qx, q_y=qy)


def step_2d(
    state: ConservedState2D,
    dt: float,
    mode: str = "plain_bed",
    manning_n=0.0,
    *,
    depth_offset: np.ndarray | None = None,
    edge_crest: np.ndarray | None = None,
    g: float = GRAVITY,
    h_dry: float = H_DRY,
) -> tuple[ConservedState2D, EdgeFluxRecord]:
    """Advance one explicit step and return the new state with its edge fluxes.

    Ghost cells are left untouched. Negative depths are clipped to zero and
    the volume added is reported per cell in the flux record.

    Raises:
        SolverError: if any updated cell is not finite.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    mesh = state.mesh
    crest = np.full(mesh.n_edges, -np.inf) if edge_crest is None else edge_crest
    flux = np.empty((mesh.n_edges, 3))
    acc = np.empty((mesh.n_cells, 3))
    _sweep(state.H, state.q_x, state.q_y, state.z_ref, mesh.edge_left, mesh.edge_right, mesh.edge_axis,
           mesh.edge_length, mesh.edge_tag, crest, g, h_dry, flux, acc)

    scale = np.where(mesh.ghost, 0.0, dt / mesh.area)
    H = state.H - scale * acc[:, 0]
    qx = state.q_x - scale * acc[:, 1]
    qy = state.q_y - scale * acc[:, 2]
    bad = ~(np.isfinite(H) & np.isfinite(qx) & np.isfinite(qy))
    if np.any(bad):
        raise SolverError("non-finite state after 2D step", int(np.argmax(bad)))

    clipped = np.zeros(mesh.n_cells)
    neg = H < 0.0
    if np.any(neg):
        clipped[neg] = -H[neg] * mesh.area[neg]
        H[neg] = 0.0
    dry = (H <= h_dry) & ~mesh.ghost
    qx[dry] = 0.0
    qy[dry] = 0.0

    new = replace(state, H=H, q_x=qx, q_y=qy)
    if np.any(np.asarray(manning_n) > 0.0):
        new = apply_friction(new, dt, manning_n, depth_offset=depth_offset, g=g, h_dry=h_dry)
    return new, EdgeFluxRecord(flux=flux, length=mesh.edge_length, dt=dt, clipped=clipped)


def stable_dt_2d(state: ConservedState2D, cfl: float, *, g: float = GRAVITY, h_dry: float = H_DRY) -> float:
    """CFL step over the non-ghost cells (raises ``NoWaveSpeedError`` when all dry)."""
    live = ~state.mesh.ghost
    u, v = state.velocities(h_dry)
    return stable_dt(state.H[live], u[live], state.mesh.cell_dx[live], cfl, v=v[live],
                     dy=state.mesh.cell_dy[live], g=g, h_dry=h_dry)
