"""Pytest plumbing: per-criterion pass/fail summary for the acceptance suite."""

_acceptance_results = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    _acceptance_results.append(f"[acceptance] {status} {name}")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for line in _acceptance_results:
        terminalreporter.write_line(line)
