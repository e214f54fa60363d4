"""Well-balanced finite-volume solver for the 1D channel model in ``(A, Q)``.

Sections are rectangular: width ``B_top`` and bed ``Z_b_1d`` may vary along
the channel but every sub-cell of a section sits at the same bed. The
interface flux is HLL on the reconstructed hydraulic depths ``A/B`` scaled by
the interface width ``min(B_l, B_r)``; the pressure split used in
:mod:`vcmflood.swe2d` makes a flat surface with zero discharge an exact
fixed point even where the width changes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from vcmflood.fv_core import GRAVITY, H_DRY, SolverError, hll_kernel, hydrostatic_kernel, stable_dt
from vcmflood.geometry import ChannelGeometry

END_TAGS = {"wall": 0, "open": 1}


class NegativeAreaError(SolverError):
    """Adding the lateral coupling flux would leave a negative wetted area."""


@dataclass(frozen=True)
class ChannelState1D:
    """Wetted area ``A`` and discharge ``Q`` per channel cell."""

    geom: ChannelGeometry
    A: np.ndarray
    Q: np.ndarray

    @property
    def A1(self) -> np.ndarray:
        """Lower-layer area ``min(A, A_c)``."""
        return np.minimum(self.A, self.geom.A_c)

    def eta_bar(self) -> np.ndarray:
        return self.geom.free_surface(self.A)

    def mass(self) -> float:
        return float(np.sum(self.A * self.geom.dx))

    def velocity(self, h_dry: float = H_DRY) -> np.ndarray:
        wet = self.A > h_dry * self.geom.B_top
        return np.where(wet, self.Q / np.where(wet, self.A, 1.0), 0.0)


@dataclass(frozen=True)
class Flux1DRecord:
    """Interface fluxes ``(mass, momentum)`` of a 1D step, oriented in +x.

    ``clipped`` is the volume added by clipping negative areas to zero.
    """

    flux: np.ndarray
    dt: float
    clipped: float

    @property
    def boundary_outflow(self) -> float:
        return float(self.dt * (self.flux[-1, 0] - self.flux[0, 0]))


def require_rectangular(geom: ChannelGeometry) -> None:
    if not geom.is_rectangular:
        raise ValueError("the 1D solver supports rectangular sections only")


@njit(cache=True)
def _sweep_1d(A, Q, B, Zb, west, east, g, h_dry, flux, acc):
    n = A.shape[0]
    acc[:, :] = 0.0
    for k in range(n + 1):
        l = k - 1
        r = k
        if l < 0:
            Al = A[r]
            Ql = -Q[r] if west == 0 else Q[r]
            Bl = B[r]
            zl = Zb[r]
        else:
            Al = A[l]
            Ql = Q[l]
            Bl = B[l]
            zl = Zb[l]
        if r >= n:
            Ar = A[l]
            Qr = -Q[l] if east == 0 else Q[l]
            Br = B[l]
            zr = Zb[l]
        else:
            Ar = A[r]
            Qr = Q[r]
            Br = B[r]
            zr = Zb[r]
        dl = Al / Bl
        dr = Ar / Br
        if dl <= 0.0 and dr <= 0.0:
            flux[k, 0] = 0.0
            flux[k, 1] = 0.0
            continue
        dtl, dtr, zs = hydrostatic_kernel(zl, dl, zr, dr)
        ql = Ql / Bl * (dtl / dl) if dl > 0.0 else 0.0
        qr = Qr / Br * (dtr / dr) if dr > 0.0 else 0.0
        fh, fn, ft = hll_kernel(dtl, ql, 0.0, dtr, qr, 0.0, g, h_dry)
        be = min(Bl, Br)
        flux[k, 0] = be * fh
        flux[k, 1] = be * fn
        if l >= 0:
            acc[l, 0] += be * fh
            acc[l, 1] += (be * fn - be * 0.5 * g * dtl * dtl) + Bl * 0.5 * g * dl * dl
        if r < n:
            acc[r, 0] -= be * fh
            acc[r, 1] -= (be * fn - be * 0.5 * g * dtr * dtr) + Br * 0.5 * g * dr * dr


def step_1d(
    state: ChannelState1D,
    dt: float,
    manning_n: float = 0.0,
    *,
    ends: tuple[str, str] = ("wall", "wall"),
    g: float = GRAVITY,
    h_dry: float = H_DRY,
) -> tuple[ChannelState1D, Flux1DRecord]:
    """Advance ``(A, Q)`` one step without lateral exchange.

    Arguments:
        state: Current channel state.
        dt: Step size (s).
        manning_n: Manning coefficient; friction uses the hydraulic depth ``A/B``.
        ends: Upstream and downstream end conditions, ``"wall"`` or ``"open"``.

    Returns:
        The intermediate state and its interface flux record.
    """
    geom = state.geom
    require_rectangular(geom)
    west, east = (END_TAGS[e] for e in ends)
    flux = np.empty((geom.n_cells + 1, 2))
    acc = np.empty((geom.n_cells, 2))
    _sweep_1d(state.A, state.Q, geom.B_top, geom.Z_b_1d, west, east, g, h_dry, flux, acc)

    A = state.A - dt / geom.dx * acc[:, 0]
    Q = state.Q - dt / geom.dx * acc[:, 1]
    bad = ~(np.isfinite(A) & np.isfinite(Q))
    if np.any(bad):
        raise SolverError("non-finite state after 1D step", int(np.argmax(bad)))
    clipped = 0.0
    neg = A < 0.0
    if np.any(neg):
        clipped = float(-np.sum(A[neg] * geom.dx[neg]))
        A[neg] = 0.0
    Q[A <= h_dry * geom.B_top] = 0.0
    new = replace(state, A=A, Q=Q)
    if manning_n > 0.0:
        new = apply_friction_1d(new, dt, manning_n, g=g, h_dry=h_dry)
    return new, Flux1DRecord(flux=flux, dt=dt, clipped=clipped)


def apply_friction_1d(state: ChannelState1D, dt: float, manning_n: float, *, g: float = GRAVITY,
                      h_dry: float = H_DRY) -> ChannelState1D:
    """Semi-implicit Manning friction on ``Q`` with hydraulic depth ``A/B``."""
    depth = state.A / state.geom.B_top
    active = (depth > h_dry) & (state.Q != 0.0)
    if not np.any(active):
        return state
    u = state.Q[active] / state.A[active]
    Q = state.Q.copy()
    Q[active] /= 1.0 + dt * g * manning_n**2 * np.abs(u) / depth[active] ** (4.0 / 3.0)
    return replace(state, Q=Q)


def apply_coupling_flux(state: ChannelState1D, phi_A: np.ndarray, phi_Q: np.ndarray, dt: float) -> ChannelState1D:
    """Add the lateral exchange ``(phi_A, phi_Q) * dt`` to the channel state.

    Raises:
        NegativeAreaError: if any area would become negative; the caller
            retries the whole step with a smaller ``dt``.
    """
    A = state.A + np.asarray(phi_A, dtype=float) * dt
    Q = state.Q + np.asarray(phi_Q, dtype=float) * dt
    if np.any(A < 0.0):
        cell = int(np.argmin(A))
        raise NegativeAreaError(f"lateral outflow empties the channel (A = {A[cell]:.3e})", cell)
    return replace(state, A=A, Q=Q)


def stable_dt_1d(state: ChannelState1D, cfl: float, *, g: float = GRAVITY, h_dry: float = H_DRY) -> float:
    """CFL step ``cfl * dx / (|u| + sqrt(g A/B))`` over wet cells."""
    depth = state.A / state.geom.B_top
    return stable_dt(depth, state.velocity(h_dry), state.geom.dx, cfl, g=g, h_dry=h_dry)
