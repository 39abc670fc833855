import json
from pathlib import Path

import pytest

from fdesolve.problem import LinearTestProblem

REFERENCE = json.loads((Path(__file__).parent / "fixtures" / "reference.json").read_text())


@pytest.fixture(scope="session")
def reference():
    return REFERENCE


@pytest.fixture
def test_problem():
    """Reference experiment: alpha=0.8, lambda=-2, y0=2."""
    return LinearTestProblem(alpha=0.8, lam=-2.0, y0=2.0)


@pytest.fixture
def zero_problem():
    return LinearTestProblem(alpha=0.8, lam=0.0, y0=2.0)


# --- acceptance summary -----------------------------------------------------

_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "call" and report.skipped)
    previous = _ACCEPTANCE.get(number, (title, True))
    _ACCEPTANCE[number] = (title, previous[1] and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
