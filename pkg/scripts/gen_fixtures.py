#!/usr/bin/env python3
"""Regenerate the checked-in 64x48 pipeline fixtures and golden artifacts.

Inputs are synthesized from a fixed seed: a textured warped garment with a
logo patch, its region mask, a body-part label raster, a person image, and a
gray-filled agnostic image.  Goldens are produced by running the preprocess
(train and infer) and compose commands on those inputs.

Run from the repository root:  python3 scripts/gen_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from tryonkit.cli import run_golden  # noqa: E402
from tryonkit.config import load_config  # noqa: E402
from tryonkit.raster import (  # noqa: E402
    BinaryMask,
    RasterImage,
    SegmentationMap,
    save_image,
    save_mask,
    save_segmentation,
)

H, W = 64, 48
SEED = 20240612


def make_inputs(fixture_dir: Path) -> None:
    rng = np.random.default_rng(SEED)
    rows = np.arange(H)[:, None] * np.ones((1, W))
    cols = np.ones((H, 1)) * np.arange(W)[None, :]

    # Garment: smooth gradients + texture noise + a high-contrast logo patch.
    garment = np.stack(
        [
            0.25 + 0.5 * rows / H,
            0.30 + 0.4 * cols / W,
            0.50 + 0.1 * np.sin(rows / 5.0),
        ],
        axis=-1,
    )
    garment += rng.uniform(-0.08, 0.08, size=garment.shape)
    garment[28:37, 18:31] = [0.85, 0.15, 0.15]
    garment[30:35, 20:29, 1] += rng.uniform(0.0, 0.3, size=(5, 9))
    garment = np.clip(garment, 0.02, 0.98)

    # Garment region: an ellipse large enough to survive 21x21 erosion.
    ellipse = ((rows - 32) / 27.0) ** 2 + ((cols - 24) / 21.0) ** 2 <= 1.0
    garment_mask = ellipse.astype(np.uint8)

    # Body parts: torso upper (1) / lower (2), plus an arm strip (3) that
    # overlaps the garment region so torso extraction actually trims it.
    seg = np.zeros((H, W), dtype=np.int32)
    body = ((rows - 32) / 30.0) ** 2 + ((cols - 24) / 23.0) ** 2 <= 1.0
    seg[body & (rows <= 40)] = 1
    seg[body & (rows > 40)] = 2
    arm = body & (cols <= 10)
    seg[arm] = 3

    # Person image and the region kept by the agnostic mask.
    person = np.stack(
        [
            0.55 + 0.3 * cols / W,
            0.45 + 0.2 * rows / H,
            0.35 + 0.2 * ((rows + cols) / (H + W)),
        ],
        axis=-1,
    )
    person += rng.uniform(-0.05, 0.05, size=person.shape)
    person = np.clip(person, 0.02, 0.98)

    removed = ((rows - 32) / 31.0) ** 2 + ((cols - 24) / 23.5) ** 2 <= 1.0
    keep_mask = (~removed).astype(np.uint8)

    # Agnostic file uses the conventional mid-gray fill in the removed
    # region; the compose command zeroes it at load.
    agnostic = person * keep_mask[:, :, None] + 0.5 * (1 - keep_mask)[:, :, None]

    fixture_dir.mkdir(parents=True, exist_ok=True)
    save_image(RasterImage(garment), fixture_dir / "garment.png")
    save_mask(BinaryMask(garment_mask), fixture_dir / "garment_mask.png")
    save_segmentation(SegmentationMap(seg), fixture_dir / "segmentation.png")
    save_image(RasterImage(person), fixture_dir / "person.png")
    save_mask(BinaryMask(keep_mask), fixture_dir / "keep_mask.png")
    save_image(RasterImage(np.clip(agnostic, 0.0, 1.0)), fixture_dir / "agnostic.png")


GOLDEN_CFG = """\
# Pipeline golden fixture configuration (64x48, defaults everywhere else).
preprocess.torso_labels = 1,2
paths.garment = garment.png
paths.garment_mask = garment_mask.png
paths.segmentation = segmentation.png
paths.agnostic = agnostic.png
paths.keep_mask = keep_mask.png
paths.golden_dir = golden
"""


def main() -> int:
    fixture_dir = ROOT / "fixtures"
    make_inputs(fixture_dir)
    (fixture_dir / "golden.cfg").write_text(GOLDEN_CFG)

    golden_dir = fixture_dir / "golden"
    golden_dir.mkdir(parents=True, exist_ok=True)
    cfg = load_config(fixture_dir / "golden.cfg")
    run_golden(cfg, golden_dir)  # populates the scratch tree used as golden
    for manifest in golden_dir.rglob("*_manifest.txt"):
        manifest.unlink()  # goldens are the rasters only; manifests carry paths
    print(f"fixtures written to {fixture_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
