import numpy as np
import pytest

from ncdcrop.dataset import Dataset
from ncdcrop.synthetic import make_synthetic


@pytest.fixture(scope="session")
def small_synthetic():
    return make_synthetic(n_per_class=20, n_classes=3, t=12, c=4, seed=3)


@pytest.fixture
def tiny_dataset():
    values = np.array([
        [[0.1, 0.2], [0.3, 0.4]],
        [[0.5, 0.6], [0.7, 0.8]],
        [[0.9, 0.1], [0.2, 0.3]],
    ])
    return Dataset(values, np.array([0, 1, 0]), {0: "wheat", 1: "maize"})


def random_grid(rng, t, c, length=22):
    letters = np.frombuffer(b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ", np.uint8)
    return letters[rng.integers(0, length, size=(t, c))]


ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    """Store one acceptance verdict; printed in the terminal summary."""
    ACCEPTANCE_RESULTS[criterion] = ("PASS" if passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        verdict, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {verdict} - {detail}")
