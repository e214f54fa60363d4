"""Channel cross-section geometry on the laterally resolved channel mesh.

Each 1D channel cell ``i`` is split laterally into ``Ny`` sub-cells of width
``lateral_widths[i, j]`` with bed ``z_b_2d[i, j]``. The wall elevation
``eta_beta[i]`` separates the lower (1D) part of a cross-section from the
upper (2D) part. Above the wall the section is extended with straight
vertical walls, so area grows linearly with the top width ``B_top``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelGeometry:
    """Static cross-section data for every channel cell.

    Attributes:
        x_centers: Cell centres along the channel axis, shape ``(N,)``.
        dx: Cell lengths, shape ``(N,)``.
        lateral_widths: Sub-cell widths, shape ``(N, Ny)``.
        z_b_2d: Sub-cell bed elevations, shape ``(N, Ny)``.
        Z_b_1d: Lowest bed elevation of each section, shape ``(N,)``.
        eta_beta: Wall elevation of each section, shape ``(N,)``.
        B_top: Top width of each section, shape ``(N,)``.
        beta_2d: Channel depth below the wall per sub-cell, shape ``(N, Ny)``.
        A_c: Wetted area of an exactly full section, shape ``(N,)``.
        y_south: Lateral coordinate of the first sub-cell's outer face.
    """

    x_centers: np.ndarray
    dx: np.ndarray
    lateral_widths: np.ndarray
    z_b_2d: np.ndarray
    Z_b_1d: np.ndarray
    eta_beta: np.ndarray
    B_top: np.ndarray
    beta_2d: np.ndarray
    A_c: np.ndarray
    y_south: float = 0.0

    @property
    def n_cells(self) -> int:
        return self.z_b_2d.shape[0]

    @property
    def n_lateral(self) -> int:
        return self.z_b_2d.shape[1]

    @property
    def bed_below_wall(self) -> np.ndarray:
        """Bed clipped at the wall: sub-cells above the wall act as straight walls."""
        return self.eta_beta[:, None] - self.beta_2d

    @property
    def is_rectangular(self) -> bool:
        return bool(np.all(self.z_b_2d == self.Z_b_1d[:, None]))

    def lateral_centers(self) -> np.ndarray:
        """Lateral sub-cell centre coordinates, shape ``(N, Ny)``."""
        faces = self.y_south + np.cumsum(self.lateral_widths, axis=1)
        return faces - 0.5 * self.lateral_widths

    def free_surface(self, A: np.ndarray) -> np.ndarray:
        """Section-averaged free surface for every cell from its wetted area."""
        A = np.asarray(A, dtype=float)
        if self.is_rectangular:
            below = self.Z_b_1d + A / self.B_top
            above = self.eta_beta + (A - self.A_c) / self.B_top
            return np.where(A < self.A_c, below, above)
        return np.array([free_surface_level(self, i, a) for i, a in enumerate(A)])

    def depth_field(self, A: np.ndarray) -> np.ndarray:
        """Sub-cell depths ``(N, Ny)`` of the laterally flat surface holding ``A``."""
        eta = self.free_surface(A)
        return np.maximum(eta[:, None] - self.bed_below_wall, 0.0)


def build_channel_geometry(
    bed_2d: np.ndarray,
    widths: np.ndarray,
    wall: np.ndarray | Callable[[np.ndarray], np.ndarray],
    *,
    x_centers: np.ndarray | None = None,
    dx: np.ndarray | float | None = None,
    y_south: float = 0.0,
) -> ChannelGeometry:
    """Build the cross-section tables.

    Arguments:
        bed_2d: Sub-cell bed elevations ``(N, Ny)``.
        widths: Sub-cell widths, broadcastable to ``(N, Ny)``.
        wall: Wall elevation per cell, or a function of the cell centres.
        x_centers: Cell centres; defaults to cumulative ``dx`` midpoints.
        dx: Cell lengths (scalar or ``(N,)``); defaults to 1.
        y_south: Lateral coordinate of the first sub-cell's outer face.

    Returns:
        The geometry. Raises ``ValueError`` on non-positive widths or on a
        wall lying below the lowest bed point of a section.
    """
    bed = np.atleast_2d(np.asarray(bed_2d, dtype=float))
    n, ny = bed.shape
    w = np.broadcast_to(np.asarray(widths, dtype=float), (n, ny)).copy()
    if np.any(~(w > 0.0)):
        raise ValueError("lateral widths must be positive")

    dx_arr = np.broadcast_to(np.asarray(1.0 if dx is None else dx, dtype=float), (n,)).copy()
    if np.any(~(dx_arr > 0.0)):
        raise ValueError("cell lengths must be positive")
    if x_centers is None:
        x_centers = np.cumsum(dx_arr) - 0.5 * dx_arr
    x_centers = np.asarray(x_centers, dtype=float)

    wall_arr = wall(x_centers) if callable(wall) else wall
    eta_beta = np.broadcast_to(np.asarray(wall_arr, dtype=float), (n,)).copy()

    z_min = bed.min(axis=1)
    if np.any(eta_beta < z_min):
        bad = int(np.argmax(eta_beta < z_min))
        raise ValueError(f"wall elevation below the bed minimum at cell {bad}")

    beta = eta_beta[:, None] - np.minimum(bed, eta_beta[:, None])
    return ChannelGeometry(
        x_centers=x_centers,
        dx=dx_arr,
        lateral_widths=w,
        z_b_2d=bed,
        Z_b_1d=z_min,
        eta_beta=eta_beta,
        B_top=w.sum(axis=1),
        beta_2d=beta,
        A_c=(beta * w).sum(axis=1),
        y_south=float(y_south),
    )


def free_surface_level(geom: ChannelGeometry, i: int, A: float) -> float:
    """Invert the area-level relation of section ``i``.

    Below the wall the area is piecewise linear in the level with breaks at
    the sorted sub-cell beds, so the inverse is found exactly on the bracketing
    segment. At or above ``A_c`` the straight-wall extension gives
    ``eta_beta + (A - A_c) / B_top``, which returns ``beta`` exactly at ``A_c``.
    """
    if A < 0.0:
        raise ValueError(f"negative wetted area {A} at cell {i}")
    if A >= geom.A_c[i]:
        return float(geom.eta_beta[i] + (A - geom.A_c[i]) / geom.B_top[i])
    z = geom.bed_below_wall[i]
    order = np.argsort(z, kind="stable")
    zs = z[order]
    wet_width = np.cumsum(geom.lateral_widths[i][order])
    # area stored below each sorted bed level
    stored = np.concatenate(([0.0], np.cumsum(wet_width[:-1] * np.diff(zs))))
    k = int(np.searchsorted(stored, A, side="right")) - 1
    return float(zs[k] + (A - stored[k]) / wet_width[k])


def height_from_area(geom: ChannelGeometry, i: int, A: float) -> np.ndarray:
    """Sub-cell depths of section ``i`` for a laterally flat surface holding ``A``."""
    eta = free_surface_level(geom, i, A)
    return np.maximum(eta - geom.bed_below_wall[i], 0.0)


def wetted_area(geom: ChannelGeometry, i: int, eta: np.ndarray | float) -> float:
    """Wetted area of section ``i`` for per-sub-cell surface levels ``eta``."""
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (geom.n_lateral,))
    depth = np.maximum(eta - geom.z_b_2d[i], 0.0)
    return float(np.sum(depth * geom.lateral_widths[i]))
