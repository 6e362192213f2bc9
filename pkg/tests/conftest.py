import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from bsfa.data import load_dataset, read_split_files  # noqa: E402
from bsfa.synthetic import make_synthetic  # noqa: E402

torch.set_num_threads(1)

# Lines recorded by the acceptance suite, printed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A small synthetic tree on disk: 8 classes x 12 images, split 5/1/2."""
    root = tmp_path_factory.mktemp("syn_small")
    make_synthetic(root, n_classes=8, images_per_class=12, seed=3, split_counts=(5, 1, 2))
    return root


@pytest.fixture(scope="session")
def small_pools(small_dataset):
    return load_dataset(small_dataset, read_split_files(small_dataset / "splits"))
