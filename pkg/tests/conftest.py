import sys
from pathlib import Path

import numpy as np
import pytest

from rescnet.datasets import load_mnist

DATA = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_train():
    return load_mnist(DATA / "desk-train-images.idx.gz", DATA / "desk-train-labels.idx.gz")


@pytest.fixture(scope="session")
def desk_test():
    return load_mnist(DATA / "desk-test-images.idx.gz", DATA / "desk-test-labels.idx.gz")


@pytest.fixture(scope="session")
def small_train(desk_train):
    # 12 digits per class, first in file order
    index = np.concatenate([np.flatnonzero(desk_train.labels == c)[:12] for c in range(10)])
    return desk_train.subset(np.sort(index))


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
