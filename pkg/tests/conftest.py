from collections import defaultdict

import pytest

N_CRITERIA = 12
_results = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        if hasattr(rep, "wasxfail"):
            status = "xfailed" if rep.skipped else "failed"
            reason = rep.wasxfail
        elif rep.skipped:
            status, reason = "skipped", str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else ""
        else:
            status, reason = rep.outcome, ""
        _results[mark.args[0]].append((item.name, status, reason))


def _line(n, results):
    if not results:
        return f"criterion {n}: NOT RUN"
    counts = defaultdict(int)
    for _, status, _ in results:
        counts[status] += 1
    total = len(results)
    if counts["skipped"] == total:
        return f"criterion {n}: SKIP ({results[0][2].removeprefix('Skipped: ')})"
    bad = counts["failed"] + counts["xfailed"]
    verdict = "FAIL" if bad else "PASS"
    detail = f"{counts['passed']}/{total} checks passed"
    if counts["failed"]:
        detail += f"; failed: {', '.join(name for name, s, _ in results if s == 'failed')}"
    if counts["xfailed"]:
        reasons = sorted({r for _, s, r in results if s == "xfailed"})
        detail += f"; {counts['xfailed']} known-unattainable ({' | '.join(reasons)})"
    if counts["skipped"]:
        detail += f"; {counts['skipped']} skipped"
    return f"criterion {n}: {verdict} {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        terminalreporter.write_line(_line(n, _results.get(n, [])))
