from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"
MNIST_IMAGES = DATA / "mnist2k-images-idx3-ubyte.gz"
MNIST_LABELS = DATA / "mnist2k-labels-idx1-ubyte.gz"

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mnist_tiles():
    from sgmca.dataio import load_images, tile

    return tile(load_images(MNIST_IMAGES, MNIST_LABELS))


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def _report(criterion, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
