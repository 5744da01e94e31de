import pytest

_outcomes: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def _entry(item):
    number, title = item.get_closest_marker("criterion").args
    return _outcomes.setdefault(number, [title, "PASS", []])


def pytest_runtest_makereport(item, call):
    if item.get_closest_marker("criterion") is None or call.when == "teardown":
        return
    entry = _entry(item)
    if call.when == "call" and call.excinfo is None:
        return
    if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
        entry[1] = "FAIL"


@pytest.fixture
def note(request):
    """Attach a measured value to the criterion summary line."""
    entry = _entry(request.node)
    return entry[2].append


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        title, status, notes = _outcomes[number]
        extra = f" ({'; '.join(notes)})" if notes else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {title}{extra}")
