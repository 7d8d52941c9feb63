import numpy as np
import pytest

from dpkmeans.data import SyntheticSpec, gen_synthetic


@pytest.fixture(scope="session")
def five_blobs():
    """d=2, k=5, N=10^4 well-separated clusters and their true centers."""
    return gen_synthetic(SyntheticSpec(d=2, k=5, n=10_000, separation=0.6, seed=0))


@pytest.fixture(scope="session")
def two_blobs():
    return gen_synthetic(SyntheticSpec(d=2, k=2, n=2_000, separation=0.8, seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
