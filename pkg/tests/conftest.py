"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

from collections import defaultdict

import pytest

_outcomes = defaultdict(list)
_titles = {}
_details = defaultdict(list)


@pytest.fixture()
def detail(request):
    """Attach a measured-value line to the criterion of the calling test."""
    marker = request.node.get_closest_marker("criterion")
    number = marker.args[0] if marker else None

    def add(text: str) -> None:
        _details[number].append(text)
    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    _titles[number] = title
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[number].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_outcomes):
        ok = all(_outcomes[number])
        tr.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {_titles[number]}")
        for line in _details.get(number, []):
            tr.write_line(f"    {line}")
