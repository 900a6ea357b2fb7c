import numpy as np
import pytest

from structure2vec.tensor import set_debug

_ACCEPTANCE: list[tuple[str, bool, str]] = []


class AcceptanceRecorder:
    def record(self, criterion: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((criterion, bool(passed), detail))
        return bool(passed)


@pytest.fixture
def acceptance():
    return AcceptanceRecorder()


@pytest.fixture(autouse=True)
def _debug_off():
    set_debug(False)
    yield
    set_debug(False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
