import pytest

_results: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, summary): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    label, summary = mark.args
    if report.passed and not hasattr(report, "wasxfail"):
        status = "PASS"
    elif hasattr(report, "wasxfail"):
        status = "FAIL (expected, see notes)"
    else:
        status = "FAIL"
    prev = _results.get(label)
    if prev is None or prev[0] == "PASS":
        _results[label] = (status, summary)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")

    def key(label):
        head, _, tail = label.partition(".")
        return int(head), tail

    for label in sorted(_results, key=key):
        status, summary = _results[label]
        terminalreporter.write_line(f"{status} criterion {label}: {summary}")
