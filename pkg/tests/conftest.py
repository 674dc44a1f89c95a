from __future__ import annotations

import numpy as np
import pytest

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion; the outcome line is printed at the end of the run."""
    name = request.node.name

    def record(title: str, detail: str = "") -> None:
        ACCEPTANCE_RESULTS[name] = (False, f"{title} {detail}".strip())
        record.title = title
        record.detail = detail

    record.title = name
    record.detail = ""
    yield record
    rep = getattr(request.node, "rep_call", None)
    passed = bool(rep and rep.passed)
    ACCEPTANCE_RESULTS[name] = (passed, f"{record.title} {record.detail}".strip())


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (passed, text) in sorted(ACCEPTANCE_RESULTS.items()):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {text}")


@pytest.fixture
def blobs():
    """Three tight, well-separated Gaussian blobs in 2-D with their labels."""
    rng = np.random.default_rng(7)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    labels = np.repeat(np.arange(3), 20)
    points = centers[labels] + rng.normal(scale=0.3, size=(60, 2))
    return points, labels
