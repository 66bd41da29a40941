import warnings

import numpy as np
import pytest

from pimcoll.errors import SplitGroupWarning

# criterion number -> (title, outcome); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _quiet_split_groups():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SplitGroupWarning)
        yield


def pytest_runtest_logreport(report):
    marker = "test_acceptance.py::test_criterion_"
    if marker not in report.nodeid:
        return
    num = int(report.nodeid.split(marker)[1].split("_")[0])
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        title = report.nodeid.split(marker)[1].split("_", 1)[1].replace("_", " ")
        ACCEPTANCE[num] = (title, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, outcome = ACCEPTANCE[num]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {verdict}  {title}")
