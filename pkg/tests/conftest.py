import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record ``(passed, detail)`` for an acceptance criterion."""
    def record(criterion, passed, detail=""):
        _ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"{criterion}: {'PASS' if passed else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split("-")[1])):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
