import itertools

import numpy as np
import pytest

# the nested-blob fixture used across modules: max-tree is
# root(16px,0) -> 2x2 square(4px,1) -> L-shape(3px,2)
NESTED = np.array(
    [[0, 0, 0, 0],
     [0, 2, 2, 0],
     [0, 2, 1, 0],
     [0, 0, 0, 0]], dtype=np.int64)


@pytest.fixture(scope="session")
def nested_image():
    return NESTED.copy()


@pytest.fixture(scope="session")
def random_corpus():
    """200 seeded random 8x8 images over 6 gray levels."""
    rng = np.random.default_rng(12345)
    return rng.integers(0, 6, size=(200, 8, 8)).astype(np.int64)


@pytest.fixture(scope="session")
def small_corpus(random_corpus):
    """A light slice for the more expensive per-image checks."""
    return random_corpus[:40]


def exhaustive_3x3(levels=3):
    """All 3x3 images over the given gray levels (19,683 for 3 levels)."""
    for tup in itertools.product(range(levels), repeat=9):
        yield np.asarray(tup, dtype=np.int64).reshape(3, 3)


@pytest.fixture(scope="session")
def exhaustive_sample():
    """Deterministic 600-image slice of the exhaustive 3x3 corpus."""
    out = []
    for i, img in enumerate(exhaustive_3x3()):
        if i % 33 == 0:
            out.append(img)
    return out
