import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from consensus_fusion.core import EnsembleInput  # noqa: E402

ACCEPTANCE_LINES: dict[int, str] = {}


def random_ensemble(rng: np.random.Generator, n_max=50, l_max=5, g_max=30) -> EnsembleInput:
    """Random ensemble whose group count stays within ``g_max``."""
    l = int(rng.integers(2, l_max + 1))
    n = int(rng.integers(max(l, 4), n_max + 1))
    methods = int(rng.integers(2, max(2, g_max // l) + 1))
    c1 = int(rng.integers(1, methods + 1))
    clf = rng.integers(1, l + 1, size=(c1, n))
    clu = rng.integers(1, l + 1, size=(methods - c1, n))
    return EnsembleInput(l, clf, clu)


def random_stochastic(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    x = rng.exponential(size=(rows, cols))
    return x / x.sum(axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_input() -> EnsembleInput:
    """Eight objects, three classes, two classifiers and two clusterers, twelve groups."""
    return EnsembleInput(
        num_classes=3,
        classifier_outputs=[[1, 1, 1, 2, 2, 3, 3, 3], [1, 1, 2, 2, 2, 2, 3, 3]],
        clustering_outputs=[[1, 1, 1, 2, 2, 2, 3, 3], [2, 2, 1, 1, 3, 3, 3, 1]],
        true_labels=[1, 1, 1, 2, 2, 2, 3, 3],
        object_ids=[f"o{i}" for i in range(1, 9)],
    )


@pytest.fixture
def acceptance_record():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
