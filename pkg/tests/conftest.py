import pytest


def pytest_configure(config):
    config._acceptance = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, title, passed, detail)``."""
    def record(number, title, passed, detail=""):
        request.config._acceptance.append((number, title, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter, config):
    rows = getattr(config, "_acceptance", [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(rows, key=lambda r: (str(r[0]).zfill(4), r[1])):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {number}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
