from pathlib import Path

import numpy as np
import pytest

from bgn.bann import BannModel, BinaryLayer, Neuron

DATA_DIR = Path(__file__).resolve().parents[1] / "data"
HOUSING = DATA_DIR / "housing.csv"
DIABETE = DATA_DIR / "diabete.csv"

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def random_bann(rng, d, widths, max_nnz=None, names=None):
    """Random BANN with Gaussian weights; ``max_nnz`` limits first-layer supports."""
    layers = []
    d_in = d
    for k, width in enumerate(widths):
        neurons = []
        for _ in range(width):
            w = rng.normal(size=d_in)
            if k == 0 and max_nnz is not None:
                keep = rng.choice(d_in, size=min(max_nnz, d_in), replace=False)
                mask = np.zeros(d_in, dtype=bool)
                mask[keep] = True
                w[~mask] = 0.0
            neurons.append(Neuron(w, rng.normal()))
        layers.append(BinaryLayer(neurons, d_in))
        d_in = width
    names = names or [f"x{i}" for i in range(d)]
    return BannModel(layers, rng.normal(size=d_in), rng.normal(), names)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
