import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tryonkit.raster import BinaryMask, RasterImage

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURE_DIR = REPO_ROOT / "fixtures"


def rand_image(rng: np.random.Generator, h: int, w: int) -> RasterImage:
    return RasterImage(rng.uniform(0.0, 1.0, size=(h, w, 3)))


def rand_mask(rng: np.random.Generator, h: int, w: int, p: float = 0.5) -> BinaryMask:
    return BinaryMask((rng.uniform(size=(h, w)) < p).astype(np.uint8))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture
def fixture_dir() -> Path:
    if not FIXTURE_DIR.is_dir():
        pytest.skip("checked-in fixture set missing")
    return FIXTURE_DIR
