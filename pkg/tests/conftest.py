import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", deadline=None, derandomize=True, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

SCENES = os.path.join(os.path.dirname(__file__), os.pardir, "scenes")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scene_path():
    def path(name):
        return os.path.join(SCENES, f"{name}.json")
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    LEDGER = getattr(mod, "LEDGER", None)
    if not LEDGER:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(LEDGER):
        terminalreporter.write_line(LEDGER[key])
