import contextlib

import pytest

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Context manager recording one PASS/FAIL line per acceptance criterion.

    The body may fill ``info["detail"]`` with the measured numbers; the line
    is recorded even when an assertion fails.
    """
    results = request.config.stash.setdefault(_RESULTS, {})

    @contextlib.contextmanager
    def run(number: int, title: str):
        info = {"detail": ""}
        try:
            yield info
        except BaseException:
            results[number] = f"CRITERION {number} FAIL  {title}: {info['detail']}"
            raise
        results[number] = f"CRITERION {number} PASS  {title}: {info['detail']}"

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
