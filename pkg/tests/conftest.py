import numpy as np
import pytest

from stainforge.imageio import save_png


def make_tile(rng, size=32, lo=20, hi=235):
    """Flat-colored tile with noise, channels kept safely inside 8-bit."""
    base = rng.integers(lo + 25, hi - 25, 3)
    img = base + rng.normal(0.0, 18.0, size=(size, size, 3))
    return np.clip(img, lo, hi).astype(np.uint8)


@pytest.fixture
def tile_factory():
    return make_tile


@pytest.fixture
def corpus_dir(tmp_path):
    """Small two-class image tree on disk; returns (root, paths)."""
    rng = np.random.default_rng(404)
    root = tmp_path / "corpus"
    paths = []
    for cls in ("epithelium", "stroma"):
        d = root / cls
        d.mkdir(parents=True)
        for i in range(4):
            p = d / f"tile_{i}.png"
            save_png(p, make_tile(rng))
            paths.append(p)
    return root, paths
