"""Command-line entry points ``simulate`` and ``compare``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from vcmflood.harness.compare import compare
from vcmflood.harness.config import METHODS, load_config
from vcmflood.harness.runner import load_report, run


def simulate_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="simulate", description="Run a channel-floodplain simulation.")
    parser.add_argument("--config", required=True, type=Path, help="YAML configuration file")
    parser.add_argument("--method", required=True, choices=METHODS)
    parser.add_argument("--t-end", type=float, help="override the end time (s)")
    parser.add_argument("--cfl", type=float, help="override the CFL number")
    parser.add_argument("--out", type=Path, help="output directory (default: <case>_<method>)")
    args = parser.parse_args(argv)

    config = replace(load_config(args.config), method=args.method)
    if args.t_end is not None:
        config = replace(config, t_end=args.t_end, output_times=[t for t in config.output_times if t <= args.t_end])
    if args.cfl is not None:
        config = replace(config, cfl=args.cfl)
    config.validate()
    out = args.out or Path(f"{config.name}_{config.method}")
    report = run(config, out_dir=out)
    print(f"{config.method}: {report.steps} steps, {report.wall_clock:.3f} s compute, "
          f"relative volume drift {report.ledger.relative_drift():.3e}, outputs in {out}")
    return 0


def _read_probe_names(path: Path) -> list[str]:
    """Probe names from a YAML mapping ``name: [x, y]`` or a CSV ``name,x,y``."""
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        rows = [line.split(",") for line in text.splitlines() if line.strip()]
        if rows and rows[0][0].strip().lower() == "name":
            rows = rows[1:]
        return [r[0].strip() for r in rows]
    data = yaml.safe_load(text)
    if isinstance(data, dict) and "probes" in data:
        data = data["probes"]
    return list(data)


def compare_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="compare", description="Compare a run against a reference run.")
    parser.add_argument("--ref", required=True, type=Path, help="reference output directory")
    parser.add_argument("--cand", required=True, type=Path, help="candidate output directory")
    parser.add_argument("--probes", required=True, type=Path, help="probe list (YAML or CSV)")
    args = parser.parse_args(argv)

    table = compare(load_report(args.ref), load_report(args.cand), _read_probe_names(args.probes))
    print("probe,l2_error")
    for name, value in table.rows():
        print(f"{name},{value:.10g}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    commands = {"simulate": simulate_main, "compare": compare_main}
    if not argv or argv[0] not in commands:
        print("usage: python -m vcmflood {simulate|compare} ...", file=sys.stderr)
        return 2
    return commands[argv[0]](argv[1:])
