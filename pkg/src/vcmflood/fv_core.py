"""Finite-volume building blocks shared by the 1D and 2D solvers.

The scalar kernels (``hll_kernel``, ``hydrostatic_kernel``) are compiled with
numba so the edge sweeps in :mod:`vcmflood.swe2d` and :mod:`vcmflood.swe1d`
can call them directly. The public wrappers take and return small dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

GRAVITY = 9.81
H_DRY = 1e-8


class SolverError(RuntimeError):
    """A solver step failed at a specific cell."""

    def __init__(self, message: str, cell: int | None = None):
        super().__init__(message if cell is None else f"{message} (cell {cell})")
        self.cell = cell


class NoWaveSpeedError(ValueError):
    """Raised by :func:`stable_dt` when no cell is wet."""


@dataclass(frozen=True)
class EdgeState:
    """State expressed in an edge frame: depth, normal and tangential discharge."""

    h: float
    q_n: float = 0.0
    q_t: float = 0.0

    def __post_init__(self):
        if self.h < 0.0:
            raise ValueError(f"negative depth {self.h}")
        if self.h == 0.0 and (self.q_n != 0.0 or self.q_t != 0.0):
            raise ValueError("dry state must carry zero discharge")


@dataclass(frozen=True)
class NumericalFlux:
    f_h: float
    f_qn: float
    f_qt: float

    def as_array(self) -> np.ndarray:
        return np.array([self.f_h, self.f_qn, self.f_qt])


def _unit_normal(normal) -> tuple[float, float]:
    nx, ny = (float(c) for c in normal)
    if abs(math.hypot(nx, ny) - 1.0) > 1e-12:
        raise ValueError(f"normal {normal!r} is not a unit vector")
    return nx, ny


def rotate_to_edge(state, normal) -> EdgeState:
    """Express ``(H, q_x, q_y)`` in the frame of an edge with unit ``normal``."""
    nx, ny = _unit_normal(normal)
    h, qx, qy = (float(c) for c in state)
    return EdgeState(h, nx * qx + ny * qy, -ny * qx + nx * qy)


def rotate_back(flux: NumericalFlux, normal) -> np.ndarray:
    """Map an edge-frame flux back to ``(x, y)`` components."""
    nx, ny = _unit_normal(normal)
    return np.array([flux.f_h, nx * flux.f_qn - ny * flux.f_qt, ny * flux.f_qn + nx * flux.f_qt])


@njit(cache=True)
def hll_kernel(hl, qnl, qtl, hr, qnr, qtr, g, h_dry):
    """HLL flux between two edge-frame states; returns ``(f_h, f_qn, f_qt)``."""
    if hl <= 0.0 and hr <= 0.0:
        return 0.0, 0.0, 0.0
    if hl > h_dry:
        ul = qnl / hl
        vl = qtl / hl
    else:
        ul = 0.0
        vl = 0.0
        qnl = 0.0
        qtl = 0.0
    if hr > h_dry:
        ur = qnr / hr
        vr = qtr / hr
    else:
        ur = 0.0
        vr = 0.0
        qnr = 0.0
        qtr = 0.0
    fl_h = qnl
    fl_n = qnl * ul + 0.5 * g * hl * hl
    fl_t = qnl * vl
    if hl == hr and qnl == qnr and qtl == qtr:
        # consistency taken literally keeps lake-at-rest updates exact
        return fl_h, fl_n, fl_t
    fr_h = qnr
    fr_n = qnr * ur + 0.5 * g * hr * hr
    fr_t = qnr * vr
    cl = math.sqrt(g * hl)
    cr = math.sqrt(g * hr)
    if hl <= h_dry:
        sl = ur - 2.0 * cr
        sr = ur + cr
    elif hr <= h_dry:
        sl = ul - cl
        sr = ul + 2.0 * cl
    else:
        sl = min(ul - cl, ur - cr)
        sr = max(ul + cl, ur + cr)
    if sl >= 0.0:
        return fl_h, fl_n, fl_t
    if sr <= 0.0:
        return fr_h, fr_n, fr_t
    inv = 1.0 / (sr - sl)
    f_h = (sr * fl_h - sl * fr_h + sl * sr * (hr - hl)) * inv
    f_n = (sr * fl_n - sl * fr_n + sl * sr * (qnr - qnl)) * inv
    f_t = (sr * fl_t - sl * fr_t + sl * sr * (qtr - qtl)) * inv
    return f_h, f_n, f_t


@njit(cache=True)
def hydrostatic_kernel(zl, hl, zr, hr):
    """Reconstructed depths ``(h_l, h_r)`` and interface level ``z*``."""
    zs = max(zl, zr)
    # subtracting the step keeps h exact on the side that owns z*
    htl = max(hl - (zs - zl), 0.0)
    htr = max(hr - (zs - zr), 0.0)
    return htl, htr, zs


def hll_flux(left: EdgeState, right: EdgeState, g: float = GRAVITY, h_dry: float = H_DRY) -> NumericalFlux:
    """HLL numerical flux in the edge frame (zero when both sides are dry)."""
    return NumericalFlux(*hll_kernel(left.h, left.q_n, left.q_t, right.h, right.q_n, right.q_t, g, h_dry))


def hydrostatic_pair(left: tuple[float, float], right: tuple[float, float]) -> tuple[float, float, float]:
    """Hydrostatic reconstruction of ``(z_ref, h)`` on each side of an edge.

    Returns ``(h_tilde_left, h_tilde_right, z_star)``.
    """
    (zl, hl), (zr, hr) = left, right
    if hl < 0.0 or hr < 0.0:
        raise ValueError("depths must be non-negative")
    return hydrostatic_kernel(float(zl), float(hl), float(zr), float(hr))


def scaled_state(state, h_tilde: float) -> np.ndarray:
    """Scale ``(h, q_x, q_y)`` to depth ``h_tilde`` at fixed velocity (0/0 -> 0)."""
    h, qx, qy = (float(c) for c in state)
    if h <= 0.0:
        return np.zeros(3)
    ratio = h_tilde / h
    return np.array([h_tilde, qx * ratio, qy * ratio])


def interface_source(h: float, h_tilde: float, g: float = GRAVITY) -> np.ndarray:
    """Edge-frame momentum correction ``(0, g/2 (h^2 - h_tilde^2), 0)``."""
    return np.array([0.0, 0.5 * g * (h * h - h_tilde * h_tilde), 0.0])


def stable_dt(
    h: np.ndarray,
    u: np.ndarray,
    dx: np.ndarray | float,
    cfl: float,
    *,
    v: np.ndarray | None = None,
    dy: np.ndarray | float | None = None,
    g: float = GRAVITY,
    h_dry: float = H_DRY,
) -> float:
    """CFL time step over the wet cells.

    In 2D the directional rates are summed,
    ``dt = cfl / max((|u| + c)/dx + (|v| + c)/dy)``, which keeps the
    first-order update a convex combination on rectangles.

    Raises:
        NoWaveSpeedError: if no cell is deeper than ``h_dry``.
    """
    if not 0.0 < cfl <= 1.0:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    h = np.asarray(h, dtype=float)
    wet = h > h_dry
    if not np.any(wet):
        raise NoWaveSpeedError("no wet cell")
    c = np.sqrt(g * h[wet])
    rate = (np.abs(np.asarray(u, dtype=float)[wet]) + c) / np.broadcast_to(dx, h.shape)[wet]
    if v is not None:
        rate = rate + (np.abs(np.asarray(v, dtype=float)[wet]) + c) / np.broadcast_to(dy, h.shape)[wet]
    return float(cfl / rate.max())

