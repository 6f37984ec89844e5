import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    "c1": "operator correctness",
    "c2": "exact-K thresholding",
    "c3": "QP optimality",
    "c4": "LARS vs coordinate-descent oracle",
    "c5": "planted support recovery",
    "c6": "exhaustive oracle dominance",
    "c7": "Hang Seng table ballpark",
    "c8": "N=2151 scale smoke test",
    "c9": "sweep determinism",
}

_outcomes = {}


def _criterion(nodeid):
    if "test_acceptance.py::test_c" not in nodeid:
        return None
    return nodeid.split("::test_")[1].split("_")[0]


def pytest_runtest_logreport(report):
    key = _criterion(report.nodeid)
    if key is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        detail = dict(report.user_properties).get("detail", "")
        if report.skipped and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2]
        _outcomes.setdefault(key, []).append((report.nodeid.split("::")[-1], outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key, title in CRITERIA.items():
        for name, outcome, detail in _outcomes.get(key, []):
            tr.write_line(f"{outcome:4s} criterion {key[1:]} ({title}) [{name}] {detail}")
