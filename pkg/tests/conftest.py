from pathlib import Path

import numpy as np
import pytest

from wattrank.ptx_parser import parse_ptx_file

DATA_DIR = Path(__file__).parent / "data"


def preactivation_margin(model, X) -> float:
    """Smallest |pre-activation| over all hidden units and samples.

    Central finite differences are only valid away from ReLU kinks, so
    gradient-check inputs are required to keep a margin around 0.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    margin = np.inf
    a = X
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ W.T + b
        margin = min(margin, float(np.abs(z).min()))
        a = np.maximum(z, 0.0)
    return margin


@pytest.fixture(scope="session")
def corpus_path() -> Path:
    return DATA_DIR / "copy_kernel.ptx"


@pytest.fixture(scope="session")
def corpus_doc(corpus_path):
    return parse_ptx_file(corpus_path)
