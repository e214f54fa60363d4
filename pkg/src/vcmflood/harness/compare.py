"""Probe and field error measures between a reference run and a candidate."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from vcmflood.harness.runner import RunReport


@dataclass(frozen=True)
class ComparisonTable:
    """L2-in-time free-surface error per probe and the final-field RMS error."""

    probe_errors: dict[str, float]
    final_field: float

    @property
    def mean_probe_error(self) -> float:
        return float(np.mean(list(self.probe_errors.values()))) if self.probe_errors else 0.0

    def rows(self) -> list[tuple[str, float]]:
        return [*self.probe_errors.items(), ("final_field", self.final_field)]


def l2_in_time(times: np.ndarray, error: np.ndarray) -> float:
    """``sqrt(integral e(t)^2 dt)`` by the trapezoidal rule."""
    if len(times) < 2:
        return float(np.abs(error).max()) if len(error) else 0.0
    return float(np.sqrt(np.trapezoid(error**2, times)))


def compare(reference: RunReport, candidate: RunReport, probes: Iterable[str] | None = None) -> ComparisonTable:
    """Compare free-surface elevations of ``candidate`` against ``reference``.

    Candidate probe series are linearly interpolated to the reference sampling
    times. The final fields are compared at the reference cell centres using
    the nearest candidate cell.

    Raises:
        ValueError: if a requested probe is missing or placed differently in the candidate.
    """
    names = list(reference.probes if probes is None else probes)
    errors = {}
    for name in names:
        if name not in reference.probes or name not in candidate.probes:
            raise ValueError(f"probe {name!r} missing from one of the runs")
        if not np.allclose(reference.probe_coords[name], candidate.probe_coords[name], atol=1e-12):
            raise ValueError(f"probe {name!r} sits at different coordinates in the two runs")
        cand = np.interp(reference.times, candidate.times, candidate.probes[name])
        errors[name] = l2_in_time(reference.times, cand - reference.probes[name])

    ref = reference.final_surface()
    cnd = candidate.final_surface()
    tree = cKDTree(np.column_stack([cnd.column("x"), cnd.column("y")]))
    _, nearest = tree.query(np.column_stack([ref.column("x"), ref.column("y")]))
    eta_ref = ref.column("z_b") + ref.column("H")
    eta_cnd = (cnd.column("z_b") + cnd.column("H"))[nearest]
    final = float(np.sqrt(np.mean((eta_cnd - eta_ref) ** 2))) if len(eta_ref) else 0.0
    return ComparisonTable(errors, final)
