import pytest

_ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Store an acceptance outcome so the terminal summary can list it."""
    def record(outcome):
        _ACCEPTANCE[outcome.number] = outcome
        return outcome
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number].line())
