"""Prints one verdict line per acceptance criterion at the end of the run."""

import pytest

_VERDICTS: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        notes = "; ".join(str(v) for k, v in item.user_properties if k == "note")
        _VERDICTS[number] = (title, "PASS" if rep.passed else "FAIL", notes)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        title, verdict, notes = _VERDICTS[number]
        line = f"criterion {number}: {verdict}  {title}"
        terminalreporter.write_line(line + (f"  [{notes}]" if notes else ""))
