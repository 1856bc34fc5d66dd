import pytest

_LINES = []


class _Reporter:
    """Collects one PASS/FAIL line per acceptance check; printed in the terminal summary."""

    def __call__(self, label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        _LINES.append(line)
        print(line)
        return ok

    def skip(self, label, reason):
        _LINES.append(f"[SKIP] {label}: {reason}")
        pytest.skip(reason)


@pytest.fixture
def report():
    return _Reporter()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
