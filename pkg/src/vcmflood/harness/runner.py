"""The fixed time loop shared by all methods."""

from __future__ import annotations

import time as clock
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from vcmflood.fv_core import NoWaveSpeedError
from vcmflood.harness.config import SimulationConfig, dump_config
from vcmflood.harness.io import Table, read_table, snapshot_name, write_table
from vcmflood.harness.ledger import ConservationLedger
from vcmflood.harness.models import MethodAdapter, build_adapter
from vcmflood.swe1d import NegativeAreaError
from vcmflood.vcm import InvariantViolation

MAX_HALVINGS = 5
MAIN = "surface"


@dataclass
class RunReport:
    """Outputs of one run.

    Attributes:
        method: Method name.
        times: Probe sampling times.
        probes: Free-surface series per probe name.
        probe_coords: Probe coordinates.
        snapshots: Tables per output time, keyed by part (``surface`` for the
            laterally resolved field).
        ledger: Volume ledger, ``None`` for reports loaded from disk.
        wall_clock: Seconds spent computing time steps.
        steps: Number of accepted steps.
        diagnostics: Scalar run diagnostics.
    """

    method: str
    times: np.ndarray
    probes: dict[str, np.ndarray]
    probe_coords: dict[str, tuple[float, float]]
    snapshots: dict[float, dict[str, Table]]
    ledger: ConservationLedger | None = None
    wall_clock: float = 0.0
    steps: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def final_time(self) -> float:
        return max(self.snapshots)

    def final_surface(self) -> Table:
        return self.snapshots[self.final_time][MAIN]


def event_times(config: SimulationConfig) -> tuple[np.ndarray, set[float], set[float]]:
    """All stopping times, the probe sampling times and the output times."""
    n = int(np.floor(config.t_end / config.probe_interval + 1e-9))
    probes = {round(k * config.probe_interval, 12) for k in range(n + 1)} | {config.t_end}
    outputs = set(config.output_times) | {config.t_end}
    return np.array(sorted(probes | outputs)), probes, outputs


def _lateral_spread(adapter: MethodAdapter, surface, state) -> float:
    eta = surface.channel(surface.eta)
    H = surface.channel(surface.H)
    wet = H > adapter.config.h_dry
    hi = np.where(wet, eta, -np.inf).max(axis=1)
    lo = np.where(wet, eta, np.inf).min(axis=1)
    spread = np.where(wet.any(axis=1), hi - lo, 0.0)
    mask = adapter.flooding_cells(state)
    return float(spread[mask].max()) if mask.any() else 0.0


def run(config: SimulationConfig, *, out_dir: str | Path | None = None, audit: bool | None = None) -> RunReport:
    """Run ``config`` to ``t_end``; optionally write CSV outputs to ``out_dir``.

    Raises:
        InvariantViolation: if an audited invariant or the volume balance fails.
        SolverError: if a sub-solver fails.
    """
    adapter = build_adapter(config)
    audit = config.audit if audit is None else audit
    state = adapter.initial_state()
    if audit:
        adapter.audit(state, None)

    mesh = adapter.output_mesh()
    probe_cells = {}
    for name, (x, y) in config.probes.items():
        cell = mesh.locate(x, y)
        if cell < 0:
            raise ValueError(f"probe {name} at ({x}, {y}) lies outside the domain")
        probe_cells[name] = cell

    events, probe_times, output_times = event_times(config)
    channel0, floodplain0 = adapter.masses(state)
    ledger = ConservationLedger(channel0, floodplain0)
    samples: list[tuple[float, list[float]]] = []
    snapshots: dict[float, dict[str, Table]] = {}
    diagnostics = {"max_lateral_spread_flooding": 0.0, "halvings": 0, "first_full_step": None,
                   "first_floodplain_wet_step": None}
    fp_dry_initially = floodplain0 == 0.0
    any_full = adapter.channel_full(state)
    last_info = None

    def visit(t: float) -> None:
        surface = adapter.surface(state)
        if t in probe_times:
            samples.append((t, [float(surface.eta[probe_cells[k]]) for k in config.probes]))
            diagnostics["max_lateral_spread_flooding"] = max(diagnostics["max_lateral_spread_flooding"],
                                                             _lateral_spread(adapter, surface, state))
        if t in output_times:
            tables = {MAIN: surface.table(config.h_dry)}
            tables.update(adapter.extra_tables(state, last_info))
            snapshots[t] = tables

    t = 0.0
    step = 0
    busy = 0.0
    for target in events:
        while t < target:
            tic = clock.perf_counter()
            try:
                dt = adapter.stable_dt(state, config.cfl)
            except NoWaveSpeedError:
                dt = config.fallback_dt
            dt = min(dt, target - t)
            for attempt in range(MAX_HALVINGS + 1):
                try:
                    new_state, info = adapter.step(state, dt)
                    break
                except NegativeAreaError:
                    if attempt == MAX_HALVINGS:
                        raise
                    dt *= 0.5
                    diagnostics["halvings"] += 1
            busy += clock.perf_counter() - tic
            step += 1
            t = target if t + dt >= target else t + dt
            if audit:
                try:
                    adapter.audit(new_state, info)
                except InvariantViolation as err:
                    raise InvariantViolation(str(err), err.cell, step) from err
                channel, floodplain = adapter.masses(new_state)
                ledger.record(step, t, dt, channel, floodplain, info.boundary_outflow, info.clipped)
                if fp_dry_initially and floodplain > 0.0 and diagnostics["first_floodplain_wet_step"] is None:
                    diagnostics["first_floodplain_wet_step"] = step
                    if not any_full:
                        raise InvariantViolation("water reached the dry floodplain before any channel cell was full",
                                                 step=step)
            state = new_state
            last_info = info
            if not any_full and adapter.channel_full(state):
                any_full = True
                diagnostics["first_full_step"] = step
        visit(float(target))

    times = np.array([s[0] for s in samples])
    values = np.array([s[1] for s in samples]) if samples else np.zeros((0, len(config.probes)))
    report = RunReport(
        method=config.method,
        times=times,
        probes={name: values[:, k] for k, name in enumerate(config.probes)},
        probe_coords=dict(config.probes),
        snapshots=snapshots,
        ledger=ledger,
        wall_clock=busy,
        steps=step,
        diagnostics=diagnostics,
    )
    if out_dir is not None:
        write_report(report, config, out_dir)
    return report


def write_report(report: RunReport, config: SimulationConfig, out_dir: str | Path) -> None:
    """Write snapshots, probe series, the ledger and a run summary to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for t, tables in sorted(report.snapshots.items()):
        for part, table in tables.items():
            write_table(table, out / snapshot_name(report.method, t, None if part == MAIN else part))
    names = list(report.probes)
    write_table(Table(("time", *names), np.column_stack([report.times, *(report.probes[n] for n in names)])),
                out / "probes.csv")
    if report.ledger is not None:
        write_table(report.ledger.table(), out / "ledger.csv")
    summary = {
        "method": report.method,
        "case": config.name,
        "t_end": float(config.t_end),
        "steps": report.steps,
        "wall_clock": report.wall_clock,
        "output_times": sorted(float(t) for t in report.snapshots),
        "probes": {k: [float(v[0]), float(v[1])] for k, v in report.probe_coords.items()},
        "diagnostics": {k: v for k, v in report.diagnostics.items()},
    }
    if report.ledger is not None:
        summary["relative_volume_drift"] = report.ledger.relative_drift()
    with open(out / "run.yaml", "w") as fh:
        yaml.safe_dump(summary, fh, sort_keys=False)
    dump_config(config, out / "config.yaml")


def load_report(out_dir: str | Path) -> RunReport:
    """Read a report written by :func:`write_report` (without its ledger)."""
    out = Path(out_dir)
    with open(out / "run.yaml") as fh:
        summary = yaml.safe_load(fh)
    method = summary["method"]
    probes = read_table(out / "probes.csv")
    snapshots = {}
    for t in summary["output_times"]:
        snapshots[float(t)] = {MAIN: read_table(out / snapshot_name(method, t))}
    return RunReport(
        method=method,
        times=probes.column("time"),
        probes={name: probes.column(name) for name in probes.columns[1:]},
        probe_coords={k: tuple(v) for k, v in summary["probes"].items()},
        snapshots=snapshots,
        wall_clock=float(summary["wall_clock"]),
        steps=int(summary["steps"]),
        diagnostics=summary.get("diagnostics", {}),
    )
