import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# check number -> (status, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def report():
    """Record the outcome line of one acceptance criterion."""

    def _report(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE[number] = ("PASS" if passed else "FAIL", detail)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
