import logging

import pytest


@pytest.fixture(autouse=True)
def _quiet_scenario_warnings():
    # scenario self-check warnings are expected in short test runs
    logging.getLogger("hmacsim").setLevel(logging.ERROR)
    yield
    logging.getLogger("hmacsim").setLevel(logging.NOTSET)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if not acceptance_log.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(acceptance_log.LINES):
        terminalreporter.write_line(acceptance_log.LINES[key])
