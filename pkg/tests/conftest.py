import time
import warnings
from contextlib import contextmanager

import numpy as np
import pytest

from ringpair import SystemConfig, rate_record
from ringpair.transfer import Location

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile (or load) the numba kernels once so timed tests measure steady state."""
    cfg = SystemConfig.symmetric(0.9, 0.99, 1e-5)
    for loc in (Location.OUTPUT_BUS, Location.INTRACAVITY):
        rate_record(cfg, np.array([0.0, 0.1]), loc)
        rate_record(cfg, 0.0, loc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Time a block, record one PASS/FAIL line, and enforce the runtime limit."""

    @contextmanager
    def run(number, title, limit_s):
        t0 = time.perf_counter()
        ok = False
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                yield
            ok = True
        finally:
            elapsed = time.perf_counter() - t0
            passed = ok and elapsed < limit_s
            ACCEPTANCE_LINES.append(
                f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {title} ({elapsed:.2f} s, limit {limit_s:g} s)")
            print(ACCEPTANCE_LINES[-1])
        assert elapsed < limit_s, f"criterion {number} took {elapsed:.2f} s (limit {limit_s} s)"

    return run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
