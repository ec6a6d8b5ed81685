"""Shared fixtures and the acceptance-criterion summary hook."""
import numpy as np
import pytest

_CRITERIA: dict[int, tuple[bool, str]] = {}


def record_criterion(num: int, passed: bool, detail: str) -> None:
    """Stash one criterion verdict for the end-of-run summary block."""
    _CRITERIA[num] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        passed, detail = _CRITERIA[num]
        verdict = "pass" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {verdict}  {detail}")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
