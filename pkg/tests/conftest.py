import numpy as np
import pytest

from neugen.imagecore import ImageF
from neugen.synthetic import affine_corpus, write_corpus


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def delta3():
    return ImageF(np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]))


@pytest.fixture(scope="session")
def small_corpus():
    return affine_corpus(n_scenes=2, n_variants=2, size=48, seed=7)


@pytest.fixture
def corpus_dir(tmp_path, small_corpus):
    root = tmp_path / "data"
    write_corpus(root, small_corpus)
    return root
