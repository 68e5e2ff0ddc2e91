import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from diffilt.corpus import build_corpus, corpus_image


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """The 20-image 256x256 evaluation corpus, built once per session."""
    path = tmp_path_factory.mktemp("corpus")
    build_corpus(path)
    return path


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory):
    """Four 64x64 images for cheap end-to-end runs."""
    path = tmp_path_factory.mktemp("corpus64")
    build_corpus(path, count=4, size=64)
    return path


@pytest.fixture(scope="session")
def photo():
    """One 64x64 natural crop."""
    return corpus_image(2, size=64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
