from __future__ import annotations

_criteria: dict[int, str] = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        k = props["criterion"]
        status = "PASS" if report.passed else "FAIL"
        _criteria[k] = f"{status}  criterion {k:>2}  {props.get('title', '')}: {props.get('detail', '')}"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        terminalreporter.write_line(_criteria[k])
