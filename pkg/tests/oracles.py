"""Independent reference computations used by the tests."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

G = 9.81


def stoker_solution(x, t, x_dam, h_left, h_right, g=G):
    """Exact depth and velocity of the wet-bed dam break (fluid initially at rest).

    The middle state solves ``f(h, h_left) + f(h, h_right) = 0`` where ``f``
    is the rarefaction branch below the side depth and the shock branch above.
    """
    def branch(h, hk):
        if h <= hk:
            return 2.0 * (math.sqrt(g * h) - math.sqrt(g * hk))
        return (h - hk) * math.sqrt(0.5 * g * (h + hk) / (h * hk))

    h_star = brentq(lambda h: branch(h, h_left) + branch(h, h_right), 1e-12, h_left, xtol=1e-15, rtol=1e-15)
    u_star = -branch(h_star, h_left)
    c_left = math.sqrt(g * h_left)
    c_star = math.sqrt(g * h_star)
    shock = h_star * u_star / (h_star - h_right)

    xi = (np.asarray(x, dtype=float) - x_dam) / t
    h = np.empty_like(xi)
    u = np.empty_like(xi)
    left = xi <= -c_left
    fan = (xi > -c_left) & (xi <= u_star - c_star)
    middle = (xi > u_star - c_star) & (xi < shock)
    right = xi >= shock
    h[left], u[left] = h_left, 0.0
    h[fan] = (2.0 * c_left - xi[fan]) ** 2 / (9.0 * g)
    u[fan] = 2.0 * (xi[fan] + c_left) / 3.0
    h[middle], u[middle] = h_star, u_star
    h[right], u[right] = h_right, 0.0
    return h, u


def hll_reference(left, right, g=G):
    """Three-branch HLL flux for two wet 1D states ``(h, hu)`` written out directly."""
    (hl, ql), (hr, qr) = left, right
    ul, ur = ql / hl, qr / hr
    cl, cr = math.sqrt(g * hl), math.sqrt(g * hr)
    sl = min(ul - cl, ur - cr)
    sr = max(ul + cl, ur + cr)
    fl = np.array([ql, ql * ul + g * hl**2 / 2])
    fr = np.array([qr, qr * ur + g * hr**2 / 2])
    if sl >= 0:
        return fl
    if sr <= 0:
        return fr
    ul_vec, ur_vec = np.array([hl, ql]), np.array([hr, qr])
    return (sr * fl - sl * fr + sl * sr * (ur_vec - ul_vec)) / (sr - sl)


def physical_flux(h, qx, qy, normal, g=G):
    """Exact shallow-water flux ``F(U) . n`` in the x-y frame."""
    nx, ny = normal
    u, v = qx / h, qy / h
    un = u * nx + v * ny
    p = 0.5 * g * h * h
    return np.array([h * un, qx * un + p * nx, qy * un + p * ny])


def gap_removal_trace(h2_star, dy, gap, tol=1e-12):
    """Plain-Python transcription of the uniform gap-removal passes.

    Stops once both the residual gap height and the residual gap area are at most ``tol``.
    """
    h2 = list(h2_star)
    width = sum(dy)
    h_gap = gap / width
    while h_gap > tol or gap > tol:
        for j in range(len(h2)):
            before = h2[j]
            h2[j] = max(0.0, h2[j] - h_gap)
            gap -= abs(h2[j] - before) * dy[j]
        h_gap = gap / width
    return np.array(h2), gap
