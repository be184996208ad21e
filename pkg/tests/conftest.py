import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pulselab import Pulse, SystemParams


def pytest_collection_modifyitems(config, items):
    if config.getoption("-m"):
        return
    skip = pytest.mark.skip(reason="slow: run with -m slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def table1_params():
    return SystemParams()


@pytest.fixture(scope="session")
def short_pulse():
    rng = np.random.default_rng(11)
    return Pulse(rng.uniform(-1.0, 1.0, size=40), 0.05)


@pytest.fixture(scope="session")
def reference_pulse():
    """Optimized 50 ns flat-top pulse shared by the acceptance criteria
    and the filter regression (deterministic)."""
    from pulselab.oct import GuessPulse, OptimizerConfig, grape_optimize
    from pulselab.system import AMP_CAP_GHZ

    guess = GuessPulse("flat_top", 50.0, amplitude=0.5, rise=2.0)
    cfg = OptimizerConfig(max_iters=200, amp_cap=AMP_CAP_GHZ,
                          convergence_jt=1e-6)
    pulse, trace = grape_optimize(SystemParams(), guess, cfg)
    return pulse, trace


_ACCEPTANCE_RESULTS = []


def record_criterion(number: int, description: str, passed: bool,
                     detail: str = ""):
    _ACCEPTANCE_RESULTS.append((number, description, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, desc, passed, detail in sorted(_ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number:2d} [{status}] {desc}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
