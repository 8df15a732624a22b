import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(label, text): acceptance criterion reported in the summary"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        label, text = marker.args
        entry = _RESULTS.setdefault(label, {"text": text, "passed": True, "detail": []})
        entry["passed"] &= report.passed
        detail = getattr(item, "acceptance_detail", None)
        if detail:
            entry["detail"].append(detail)


def _natural(label):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", label)]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label in sorted(_RESULTS, key=_natural):
        entry = _RESULTS[label]
        status = "PASS" if entry["passed"] else "FAIL"
        tr.write_line(f"[{status}] {label:>4}  {entry['text']}")
        for line in entry["detail"]:
            for sub in line.splitlines():
                tr.write_line(f"             {sub}")
