import pytest

_RESULTS_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")
    config.stash[_RESULTS_KEY] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, title = mark.args
    details = [v for k, v in item.user_properties if k == "detail"]
    status = "PASS" if rep.passed else ("XFAIL" if hasattr(rep, "wasxfail") else "FAIL")
    item.config.stash[_RESULTS_KEY][number] = (title, status, "; ".join(details), rep.duration)


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS_KEY]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, status, detail, secs = results[number]
        line = f"[{status}] criterion {number:2d}: {title} ({secs:.1f} s)"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
