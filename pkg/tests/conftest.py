"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_RESULTS = {}


@pytest.fixture
def detail(request):
    """Free-form measurements for the acceptance summary line."""
    d = {}
    request.node.acceptance_detail = d
    return d


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call":
        return
    info = getattr(item, "acceptance_detail", {})
    text = ", ".join(f"{k}={v}" for k, v in info.items())
    _RESULTS[marker.args[0]] = ("PASS" if rep.passed else "FAIL", text)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (status, text) in _RESULTS.items():
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{text}]" if text else ""))
