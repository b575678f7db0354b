"""Collects one PASS/FAIL line per acceptance criterion and prints them at the end of the run."""

_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, title): acceptance criterion checked by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.skipped):
        return
    label = dict(report.user_properties).get("criterion")
    if label is None:
        return
    if report.skipped and not hasattr(report, "wasxfail"):
        status = "SKIP"
    elif report.passed:
        status = "PASS"
    else:
        status = "FAIL"
    detail = dict(report.user_properties).get("detail", "")
    _LINES.append(f"criterion {label}: {status}  {detail}".rstrip())


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            item.user_properties.append(("criterion", f"{marker.args[0]} ({marker.args[1]})"))


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
