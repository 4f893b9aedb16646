import os

import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running experiment")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mnist_dir():
    return os.environ.get("RSC_MNIST_DIR") or _bundled_mnist()


def _bundled_mnist():
    here = os.path.join(os.path.dirname(__file__), "..", "data", "mnist")
    names = ("train-images-idx3-ubyte", "train-images-idx3-ubyte.gz")
    return here if any(os.path.exists(os.path.join(here, n)) for n in names) else None


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; lines are repeated in the terminal summary."""

    def record(label, ok, detail=""):
        line = f"CRITERION {label}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
