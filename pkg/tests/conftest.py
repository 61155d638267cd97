import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)$")
_results: dict[int, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n, slug = int(m.group(1)), m.group(2)
    ok = _results.get(n, (slug, True))[1]
    if report.failed or (report.when == "call" and not report.passed):
        ok = False
    _results[n] = (slug, ok)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        slug, ok = _results[n]
        terminalreporter.write_line(f"criterion {n} ({slug.replace('_', ' ')}): {'PASS' if ok else 'FAIL'}")
