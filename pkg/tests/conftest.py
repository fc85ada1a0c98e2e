import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("default")


_OUTCOMES: dict[int, bool] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if name.startswith("test_criterion_") and (report.when == "call" or report.failed):
        n = int(name.split("_")[2])
        _OUTCOMES[n] = _OUTCOMES.get(n, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    mod = sys.modules.get("test_acceptance")
    details = getattr(mod, "RESULTS", {})
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        detail = details.get(n, (None, "raised before reaching its check"))[1]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if _OUTCOMES[n] else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(12345)
