"""Collects acceptance outcomes and prints one line per criterion."""

from collections import OrderedDict

import pytest

_RESULTS = OrderedDict()

TITLES = {
    1: "GP cached path matches dense direct solve",
    2: "synthetic safety: TVSafeOpt never unsafe, SafeOpt unsafe at t=30,170",
    3: "synthetic regret: TVSafeOpt below SafeOpt, median reduction banded",
    4: "compressor study orderings",
    5: "frozen-problem near-optimality and containment",
    6: "invariant suites (1000 cases each)",
    7: "Lipschitz-free rules match brute-force oracles",
    8: "CLI determinism and compare arithmetic",
}


def pytest_configure(config):
    config.addinivalue_line("markers",
                            "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup"
                                      and report.failed):
        return
    props = dict(report.user_properties)
    n = props.get("criterion")
    if n is None:
        return
    entry = _RESULTS.setdefault(n, {"ok": True, "details": []})
    entry["ok"] &= report.passed
    if props.get("detail"):
        entry["details"].append(props["detail"])
    if report.failed:
        entry["details"].append(f"{report.nodeid.split('::')[-1]} failed")


@pytest.fixture(autouse=True)
def _tag_criterion(request, record_property):
    marker = request.node.get_closest_marker("criterion")
    if marker is not None:
        record_property("criterion", marker.args[0])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(TITLES):
        entry = _RESULTS.get(n)
        if entry is None:
            status, detail = "NOT RUN", ""
        else:
            status = "PASS" if entry["ok"] else "FAIL"
            detail = "; ".join(entry["details"])
        line = f"criterion {n}: {status}  {TITLES[n]}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
