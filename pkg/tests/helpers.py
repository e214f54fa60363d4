"""Small drivers shared by several test modules."""

import numpy as np

from oracles import stoker_solution
from vcmflood.geometry import build_channel_geometry
from vcmflood.swe1d import ChannelState1D, stable_dt_1d, step_1d


def rectangular(n, dx, width=1.0, bed=None, wall=10.0, ny=1):
    bed = np.zeros(n) if bed is None else bed
    return build_channel_geometry(np.repeat(bed[:, None], ny, axis=1), width / ny, wall, dx=dx)


def dam_break_error(n, length=10.0, cfl=0.95):
    """L1 depth error at t = 1 s of the 1D solver on a 1 m / 0.5 m dam break."""
    dx = length / n
    geom = rectangular(n, dx)
    x = geom.x_centers
    state = ChannelState1D(geom, np.where(x < 5.0, 1.0, 0.5), np.zeros(n))
    t = 0.0
    while t < 1.0:
        dt = min(stable_dt_1d(state, cfl), 1.0 - t)
        state, _ = step_1d(state, dt)
        t += dt
    exact, _ = stoker_solution(x, 1.0, 5.0, 1.0, 0.5)
    return np.sum(np.abs(state.A / geom.B_top - exact)) * dx
