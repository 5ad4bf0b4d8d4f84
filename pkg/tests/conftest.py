import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: call with (number, passed, detail)."""

    def record(number, passed, detail):
        _ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


@pytest.hookimpl(trylast=True)
def pytest_runtest_makereport(item, call):
    # a test that errors before recording still gets a FAIL line
    if call.when == "call" and call.excinfo is not None:
        number = getattr(item.function, "criterion_number", None)
        if number is not None and number not in _ACCEPTANCE:
            _ACCEPTANCE[number] = (False, f"raised {call.excinfo.typename}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
