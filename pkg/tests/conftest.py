import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import same_vector_dataset  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def two_region_sets(rng):
    """Small real/generated pair over two regions; same vector per view."""
    d = 6
    real = same_vector_dataset("real", {
        "Africa": rng.normal(size=(30, d)).astype(np.float32),
        "Europe": rng.normal(size=(30, d)).astype(np.float32),
    })
    generated = same_vector_dataset("generated", {
        "Africa": rng.normal(size=(24, d)).astype(np.float32),
        "Europe": rng.normal(size=(24, d)).astype(np.float32),
    }, unsegmented={"Africa": 4})
    return real, generated
