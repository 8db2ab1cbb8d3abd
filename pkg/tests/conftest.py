import pytest

from implicit_extremes.rng import RngStream

ACCEPTANCE_LINES = []


@pytest.fixture
def stream():
    return RngStream(20240531)


@pytest.fixture
def gen():
    return RngStream(20240531, 99).generator()


@pytest.fixture
def record_acceptance():
    """Collects the one-line verdicts printed at the end of the session."""

    def record(label, passed, detail):
        line = f"{label} {'PASS' if passed else 'FAIL'}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

