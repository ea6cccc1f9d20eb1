import warnings

import pytest

from satdod.baselines import OfflineProblem, solve_offline_dynamic, solve_offline_pattern
from satdod.dynamics import PowerParams
from satdod.environment import EnvParams, SlotContext, build_trace
from satdod.scheduler import PatternPartition

warnings.filterwarnings("ignore", message="Solution may be inaccurate")


def make_ctx(t=1, harvest=0.0, light=False, contact=False, snr=17.5, frame_rate=0.0, base_load=0.0):
    return SlotContext(t=t, harvest_energy=harvest, in_light=light, contact=contact,
                       snr=snr, frame_rate=frame_rate, base_load=base_load)


@pytest.fixture(scope="session")
def pp():
    return PowerParams()


@pytest.fixture(scope="session")
def default_trace():
    return build_trace(EnvParams(seed=0), 1440)


@pytest.fixture(scope="session")
def default_benchmarks(default_trace, pp):
    prob = OfflineProblem(default_trace, pp)
    return prob, solve_offline_dynamic(prob), solve_offline_pattern(prob, PatternPartition())


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def record(n: int, ok: bool, detail: str):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
