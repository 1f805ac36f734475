import re

import pytest

_RESULTS = {}


@pytest.fixture
def record_criterion(request):
    """Record one acceptance criterion; a test that raises records FAIL."""
    m = re.match(r"test_criterion_(\d+)", request.node.name)
    num = int(m.group(1)) if m else 0

    def rec(name, ok, detail=""):
        _RESULTS[num] = (name, bool(ok), detail)

    yield rec
    if num not in _RESULTS:
        _RESULTS[num] = (request.node.name, False, "raised before completion")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_RESULTS):
        name, ok, detail = _RESULTS[num]
        terminalreporter.write_line(
            f"criterion {num}: {'PASS' if ok else 'FAIL'} - {name}" + (f" [{detail}]" if detail else "")
        )
