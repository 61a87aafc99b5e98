import pytest

ACCEPTANCE = {}


def record(number, title, passed, detail):
    line = f"acceptance #{number} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE[number] = line
    print("\n" + line)
    return passed


@pytest.fixture
def report(capsys):
    def _report(number, title, passed, detail):
        with capsys.disabled():
            return record(number, title, passed, detail)
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
