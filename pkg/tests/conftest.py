import numpy as np
import pytest

from emdpriv import EmbeddingStore, RngState


@pytest.fixture
def rng():
    return RngState(20240817)


@pytest.fixture
def tiny_store():
    """Three 2-D words with distinct, well-separated vectors."""
    return EmbeddingStore.from_pairs(
        [("alpha", [0.0, 0.0]), ("beta", [3.0, 0.0]), ("gamma", [0.0, 4.0])]
    )


@pytest.fixture
def line_store():
    """Three 1-D words; asymmetric spacing exercises the closed-form cells."""
    return EmbeddingStore.from_pairs([("low", [-1.0]), ("mid", [0.0]), ("high", [2.0])])


@pytest.fixture
def word2vec_file(tmp_path):
    path = tmp_path / "fixture.txt"
    path.write_text(
        "3 2\n"
        "alpha 0.0 0.0\n"
        "beta 3.0 0.0\n"
        "gamma 0.0 4.0\n",
        encoding="utf-8",
    )
    return path


def random_vectors(generator: np.random.Generator, count: int, dim: int, scale=1.0):
    return generator.uniform(-scale, scale, size=(count, dim))
