import re

import pytest

CRITERION = re.compile(r"test_c(\d+)_")

_outcomes: dict[int, list[str]] = {}
_notes: dict[int, list[str]] = {}


def _number(nodeid: str):
    m = CRITERION.search(nodeid.split("::")[-1])
    return int(m.group(1)) if m and "test_acceptance" in nodeid else None


@pytest.fixture
def note(request):
    """Attach a one-line detail to the acceptance summary for this test's criterion."""
    n = _number(request.node.nodeid)

    def add(text):
        if n is not None:
            _notes.setdefault(n, []).append(text)
    return add


def pytest_runtest_logreport(report):
    n = _number(report.nodeid)
    if n is None:
        return
    if report.when == "call" or report.failed or report.skipped:
        _outcomes.setdefault(n, []).append(
            "FAIL" if report.failed else "SKIP" if report.skipped else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        status = "FAIL" if "FAIL" in results else "SKIP" if "PASS" not in results else "PASS"
        detail = "; ".join(_notes.get(n, []))
        tr.write_line(f"criterion {n:>2}: {status}" + (f"  ({detail})" if detail else ""))
