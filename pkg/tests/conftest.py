from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).parent / "data"
MNIST_IMAGES = DATA_DIR / "mnist08-images-idx3-ubyte.gz"
MNIST_LABELS = DATA_DIR / "mnist08-labels-idx1-ubyte.gz"

ARCHS = ["Net", "ResNet", "ODENet", "ODENetSimplex"]
TABLEAUX = ["euler", "improved_euler", "kutta3", "kutta4"]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed after the run even when output is captured
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
