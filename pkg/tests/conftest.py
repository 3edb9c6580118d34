import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from thermolab.scenarios import regression_suite  # noqa: E402

ACCEPTANCE = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    """Store the verdict of an acceptance criterion for the end-of-run summary."""
    ACCEPTANCE[number] = (title, bool(ok), detail)


@pytest.fixture(scope="session")
def suite():
    return regression_suite()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {title} -- {detail}")
