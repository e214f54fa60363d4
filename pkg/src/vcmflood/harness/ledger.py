"""Volume bookkeeping across a run.

Every accepted step records channel and floodplain volumes, the volume that
left through open boundaries and the volume added by clipping negative
depths. The step residual

    (total_new - total_old) + outflow - clipped

must stay below ``tol`` relative to the initial volume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from vcmflood.harness.io import Table
from vcmflood.vcm import InvariantViolation

LEDGER_COLUMNS = ("step", "time", "dt", "channel", "floodplain", "total", "outflow", "clipped", "residual")


@dataclass
class ConservationLedger:
    initial_channel: float
    initial_floodplain: float
    tol: float = 1e-10
    rows: list[tuple[float, ...]] = field(default_factory=list)

    @property
    def initial_total(self) -> float:
        return self.initial_channel + self.initial_floodplain

    @property
    def scale(self) -> float:
        return max(abs(self.initial_total), np.finfo(float).tiny)

    def record(self, step: int, time: float, dt: float, channel: float, floodplain: float, outflow: float,
               clipped: float) -> float:
        """Append one step; raises :class:`InvariantViolation` if the residual is too large."""
        previous = self.rows[-1][5] if self.rows else self.initial_total
        total = channel + floodplain
        residual = (total - previous) + outflow - clipped
        self.rows.append((step, time, dt, channel, floodplain, total, outflow, clipped, residual))
        if abs(residual) > self.tol * self.scale:
            raise InvariantViolation(f"volume balance residual {residual:.3e} exceeds tolerance", step=step)
        return residual

    def _column(self, name: str) -> np.ndarray:
        if not self.rows:
            return np.zeros(0)
        return np.array([r[LEDGER_COLUMNS.index(name)] for r in self.rows])

    @property
    def final_total(self) -> float:
        return self.rows[-1][5] if self.rows else self.initial_total

    @property
    def total_outflow(self) -> float:
        return float(self._column("outflow").sum())

    @property
    def total_clipped(self) -> float:
        return float(self._column("clipped").sum())

    def relative_drift(self) -> float:
        """Volume change net of boundary outflow and clipping, relative to the initial volume."""
        change = self.final_total - self.initial_total + self.total_outflow - self.total_clipped
        return change / self.scale

    def table(self) -> Table:
        data = np.array(self.rows, dtype=float) if self.rows else np.zeros((0, len(LEDGER_COLUMNS)))
        return Table(LEDGER_COLUMNS, data)
