import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_blobs():
    from oracles import blobs

    from gbtwin import LabeledDataset

    X, y = blobs(np.random.default_rng(7), [[0, 0], [4, 0], [0, 4]], 30, spread=0.3)
    return LabeledDataset(X, y)
