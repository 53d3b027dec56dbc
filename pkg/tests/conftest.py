import numpy as np
import pytest

from trafficformer.data import SyntheticSpec, generate_synthetic, prepare_splits


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_splits():
    """5-node, T=8, H=4 windows used by the gradient and model tests."""
    spec = SyntheticSpec(N=5, steps=288, noise_std=5.0, cluster_assignment=[0, 0, 1, 1, 1], seed=3)
    return prepare_splits(generate_synthetic(spec), 8, 4)


@pytest.fixture(scope="session")
def small_batch(small_splits):
    return small_splits.train.batch(np.arange(2))


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance-criteria lines collected by ``test_acceptance``."""
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
