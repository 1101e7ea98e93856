import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

#: criterion number -> (title, passed, detail)
ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """``record(num, title, passed, detail)`` stores one acceptance verdict."""

    def record(num, title, passed, detail=""):
        ACCEPTANCE[num] = (title, bool(passed), detail)
        print(f"criterion {num:2d} {'PASS' if passed else 'FAIL'}  {title}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
