import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vcmflood.harness.config import SimulationConfig  # noqa: E402
from vcmflood.harness.runner import RunReport, run  # noqa: E402

_CRITERIA: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    _CRITERIA[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def audited_run():
    """Run a configuration with audits on, once per session per (name, method)."""
    cache: dict[tuple[str, str], RunReport] = {}

    def get(config: SimulationConfig) -> RunReport:
        key = (config.name, config.method)
        if key not in cache:
            cache[key] = run(config, audit=True)
        return cache[key]

    return get
