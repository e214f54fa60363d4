"""The two channel-floodplain test cases and their variants.

Probe locations are our own choice: points along the channel centre line,
next to the bank and inside the floodplain.
"""

from __future__ import annotations

from dataclasses import replace

from vcmflood.harness.config import ChannelConfig, FloodplainConfig, SimulationConfig

CHANNEL_LENGTH = 19.3
CHANNEL_WIDTH = 0.5
CHANNEL_Y0 = 1.8


def make_test1(method: str = "vcm") -> SimulationConfig:
    """Dam break in a flat channel spilling onto a flat floodplain downstream.

    A 0.504 m reservoir fills the first 6.1 m of the channel; a 0.003 m film
    covers everything else. The floodplain lies beside the channel for
    ``x >= 12.5`` where there is no physical bank; upstream the bank is
    2.5 m high. The domain is closed except at its downstream end.
    """
    channel = ChannelConfig(
        length=CHANNEL_LENGTH,
        width=CHANNEL_WIDTH,
        cells=193,
        lateral_cells_full=25,
        lateral_cells_upper=8,
        y_south=CHANNEL_Y0,
        bed=0.0,
        wall="where(x < 14.0, tanh(10.0 - x) + 1.0, 0.0)",
        bank_elevation="where(x <= 12.5, 2.5, 0.0)",
        boundary={"west": "wall", "east": "open", "south": "wall", "north": "wall"},
    )
    floodplain = FloodplainConfig(
        name="floodplain",
        x0=12.5,
        x1=CHANNEL_LENGTH,
        y0=0.0,
        y1=CHANNEL_Y0,
        nx=68,
        ny=90,
        bed=0.0,
        boundary={"west": "wall", "east": "open", "south": "wall", "north": "wall"},
    )
    return SimulationConfig(
        name="test1",
        method=method,
        channel=channel,
        floodplains=[floodplain],
        t_end=10.0,
        initial_depth="where((x <= 6.10) & (y >= 1.8) & (y <= 2.3), 0.504, 0.003)",
        manning_n=0.009,
        cfl=0.95,
        output_times=[2.0, 4.0, 6.0, 8.0, 10.0],
        probes={
            "P1": (3.0, 2.05),
            "P2": (9.0, 2.05),
            "P3": (13.5, 1.85),
            "P4": (16.0, 2.05),
            "P5": (14.0, 1.0),
            "P6": (17.0, 0.5),
        },
    ).validate()


def make_test2(method: str = "vcm") -> SimulationConfig:
    """Channel flow overtopping a 0.5 m breach onto a raised floodplain.

    The channel starts at 1.5 m depth for ``x <= 8.5`` and 0.7 m beyond. The
    floodplain ``[10.5, 16] x [0, 1.8]`` sits 0.5 m above the channel bed
    under 0.2 m of water. The bank is 3 m high except along the breach.
    Water leaves at the channel's downstream end and the floodplain's far side.
    """
    channel = ChannelConfig(
        length=CHANNEL_LENGTH,
        width=CHANNEL_WIDTH,
        cells=193,
        lateral_cells_full=25,
        lateral_cells_upper=8,
        y_south=CHANNEL_Y0,
        bed=0.0,
        wall="where(x < 10.0, tanh(0.5 * (4.5 - x)) + 1.5, where(x <= 16.5, 0.5, tanh(x - 19.2) + 1.5))",
        bank_elevation="where((x >= 10.5) & (x <= 16.0), 0.5, 3.0)",
        boundary={"west": "wall", "east": "open", "south": "wall", "north": "wall"},
    )
    floodplain = FloodplainConfig(
        name="floodplain",
        x0=10.5,
        x1=16.0,
        y0=0.0,
        y1=CHANNEL_Y0,
        nx=55,
        ny=90,
        bed=0.5,
        boundary={"west": "wall", "east": "wall", "south": "open", "north": "wall"},
    )
    return SimulationConfig(
        name="test2",
        method=method,
        channel=channel,
        floodplains=[floodplain],
        t_end=10.0,
        initial_depth=("where(y >= 1.8, where(x <= 8.5, 1.5, 0.7), "
                       "where((x >= 10.5) & (x <= 16.0) & (y <= 1.8), 0.2, 0.0))"),
        manning_n=0.009,
        cfl=0.95,
        output_times=[2.0, 4.0, 6.0, 8.0, 10.0],
        probes={
            "P1": (2.0, 2.05),
            "P2": (7.0, 2.05),
            "P3": (9.5, 2.05),
            "P4": (12.0, 1.85),
            "P5": (14.0, 2.2),
            "P6": (17.5, 2.05),
            "P7": (11.0, 1.5),
            "P8": (13.0, 1.0),
            "P9": (15.5, 0.3),
        },
    ).validate()


def closed(config: SimulationConfig) -> SimulationConfig:
    """The same case with every boundary turned into a wall."""
    walls = dict.fromkeys(("west", "east", "south", "north"), "wall")
    channel = replace(config.channel, boundary=dict(walls))
    floodplains = [replace(fp, boundary=dict(walls)) for fp in config.floodplains]
    return replace(config, name=config.name + "_closed", channel=channel, floodplains=floodplains).validate()


def lake_at_rest(config: SimulationConfig, surface: float) -> SimulationConfig:
    """Still water at a flat ``surface`` on the geometry of ``config``, without friction."""
    return replace(config, name=f"{config.name}_rest_{surface:g}", initial_depth=0.0, initial_surface=surface,
                   initial_u=0.0, initial_v=0.0, manning_n=0.0, manning={}).validate()
