import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# fixed seed for every property suite
settings.register_profile(
    "repro",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repro")

ACCEPTANCE_FILE = "test_acceptance.py"


class SuiteRecord:
    """Outcomes of the non-acceptance tests in this session, plus acceptance lines."""

    def __init__(self):
        self.start = time.perf_counter()
        self.outcomes = {}
        self.lines = []

    @property
    def elapsed(self):
        return time.perf_counter() - self.start

    def failures(self):
        return sorted(k for k, v in self.outcomes.items() if v == "failed")


RECORD = SuiteRecord()


def pytest_collection_modifyitems(config, items):
    # acceptance runs last so criterion 9 can report on everything before it
    items.sort(key=lambda it: it.fspath.basename == ACCEPTANCE_FILE)


def pytest_runtest_logreport(report):
    if report.fspath.endswith(ACCEPTANCE_FILE):
        return
    if report.when == "call" or report.outcome == "failed":
        prev = RECORD.outcomes.get(report.nodeid)
        if prev != "failed":
            RECORD.outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if RECORD.lines:
        terminalreporter.section("acceptance criteria")
        for line in RECORD.lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def suite_record():
    return RECORD


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
