"""Shared fixtures and the acceptance summary.

Acceptance tests carry ``@pytest.mark.criterion(n, title)`` and may attach a
one-line ``detail`` with ``record_property``. After the run one line per
criterion is printed with its outcome.
"""

from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

from mmiq.chain_core import QueueSpec

settings.register_profile(
    "mmiq", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "mmiq"))

_RESULTS_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")
    config.stash[_RESULTS_KEY] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    results = item.config.stash[_RESULTS_KEY]
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        detail = dict(rep.user_properties).get("detail", "")
        if n in results:
            # parametrised criteria pass only if every case passes
            _, passed, previous = results[n]
            results[n] = (title, passed and rep.passed, "; ".join(filter(None, (previous, detail))))
        else:
            results[n] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash[_RESULTS_KEY]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, passed, detail = results[n]
        flag = "PASS" if passed else "FAIL"
        line = f"criterion {n:>2} {flag}: {title}"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)


@pytest.fixture
def two_state() -> QueueSpec:
    """Symmetric two-state chain with switching rate 5, arrivals (20, 10), service (1, 2)."""
    return QueueSpec.from_arrays([[-5.0, 5.0], [5.0, -5.0]], [20.0, 10.0], [1.0, 2.0])


@pytest.fixture
def three_state() -> QueueSpec:
    return QueueSpec.from_arrays([[-3.0, 1.0, 2.0], [0.5, -1.0, 0.5], [2.0, 2.0, -4.0]],
                                 [5.0, 1.0, 9.0], [0.7, 2.0, 1.3])


@pytest.fixture
def mm_inf() -> QueueSpec:
    return QueueSpec.from_arrays([[0.0]], [3.0], [2.0])

