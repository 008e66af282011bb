import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance(request):
    """Callable ``record(number, ok, text)``; lines are echoed in the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(number, ok, text):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(line)
