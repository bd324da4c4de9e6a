"""Shared pytest hooks: one pass/fail line per acceptance criterion."""

import pytest

_outcomes: dict = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    if call.when == "setup" and call.excinfo is not None:
        _outcomes[n] = (title, "FAIL", f"setup error: {call.excinfo.value}")
    elif call.when == "call":
        ok = call.excinfo is None
        detail = dict(item.user_properties).get("detail", "")
        if not ok:
            msg = str(call.excinfo.value).splitlines()
            detail = "; ".join(filter(None, [detail, msg[0] if msg else call.excinfo.typename]))
        _outcomes[n] = (title, "PASS" if ok else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        title, verdict, detail = _outcomes[n]
        line = f"criterion {n:2d} [{verdict}] {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)


@pytest.fixture
def record(request):
    """Attach a one-line result summary to the current test."""
    def _record(text):
        request.node.user_properties.append(("detail", text))
        print(text)
    return _record
