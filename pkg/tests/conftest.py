from __future__ import annotations

import os
from collections import defaultdict

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.register_profile("ci", parent=settings.get_profile("default"), derandomize=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CRITERIA = {
    1: "operation oracles (filter, project, order_by, union, difference, cross_product, aggregate)",
    2: "primitive closure: A - (A - B) is keyed intersection",
    3: "PageRank against dense power iteration",
    4: "pipeline equals fold of single steps",
    5: "rate fidelity and open-loop stall latency",
    6: "quantile accuracy and monotone reports",
    7: "log monitoring scaled run",
    8: "determinism of builtin runs",
    9: "backend concurrency soundness",
    10: "prescription round-trip and table conformance",
}

_outcomes: dict[int, list[bool]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number this test evidences")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = getattr(report, "_criterion", None)
    if n is not None:
        _outcomes[n].append(report.outcome == "passed")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep._criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        results = _outcomes.get(n)
        if not results:
            continue
        status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2} [{status}] {CRITERIA[n]} ({sum(results)}/{len(results)} tests)")
