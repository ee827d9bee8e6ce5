import importlib.util
from pathlib import Path

import numpy as np
import pytest

from recurrent_sr.data import list_images, read_image

ROOT = Path(__file__).resolve().parents[1]


def _load_script(name):
    spec = importlib.util.spec_from_file_location(name, ROOT / "scripts" / f"{name}.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """(train_dir, valid_dir) of 160x160 PPM tiles cut from bundled photos."""
    pytest.importorskip("skimage")
    make_corpus = _load_script("make_corpus")
    return make_corpus.build_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def natural_images(corpus):
    """Validation tiles as float64 3xHxW arrays."""
    return [read_image(p, dtype=np.float64) for p in list_images(corpus[1])]
