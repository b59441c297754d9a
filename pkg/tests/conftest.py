"""Collects acceptance outcomes and prints one line per criterion."""

import os

import pytest

os.environ.setdefault("POTT_CACHE_DIR", os.path.join(os.path.expanduser("~"), ".cache", "pott"))

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = dict(item.user_properties).get("detail", "")
        if rep.outcome != "passed" and not detail:
            detail = str(rep.longrepr).strip().splitlines()[-1][:160]
        _CRITERIA[n] = (rep.outcome == "passed", detail, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail, dur = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  "
                                    f"[{dur:.1f}s]")
