import numpy as np
import pytest
from PIL import Image

from embextract.backbone import Backbone

STUB_DIM = 16
_STUB_SIDE = 8  # stub preprocess downsamples to 8x8 RGB
_PROJECTION = np.random.default_rng(12345).normal(size=(3 * 16, STUB_DIM))


def stub_preprocess(img: Image.Image) -> np.ndarray:
    small = img.resize((_STUB_SIDE, _STUB_SIDE), Image.BILINEAR)
    arr = np.asarray(small, dtype=np.float32) / 255.0
    return np.transpose(arr, (2, 0, 1))  # CHW


def stub_patch_tokens(batch: np.ndarray) -> np.ndarray:
    """Four 4x4 quadrants per image, each linearly projected to STUB_DIM."""
    b = batch.shape[0]
    tokens = np.empty((b, 4, STUB_DIM), dtype=np.float32)
    quads = [(0, 0), (0, 4), (4, 0), (4, 4)]
    for q, (r, c) in enumerate(quads):
        patch = batch[:, :, r : r + 4, c : c + 4].reshape(b, -1)
        tokens[:, q, :] = patch @ _PROJECTION
    return tokens


@pytest.fixture
def stub_backbone():
    return Backbone(
        backbone_id="stub/quadrant-16",
        dim=STUB_DIM,
        transform_desc="stub:resize=8,bilinear",
        preprocess=stub_preprocess,
        patch_tokens=stub_patch_tokens,
    )


def write_image(path, color, size=(24, 24)):
    Image.new("RGB", size, color=color).save(path)


@pytest.fixture
def image_tree(tmp_path):
    """Two-class tree with three distinct images per class."""
    root = tmp_path / "images"
    palette = {
        "coral": [(200, 60, 40), (210, 70, 50), (190, 50, 30)],
        "shark": [(40, 60, 200), (50, 70, 210), (30, 50, 190)],
    }
    for cls, colors in palette.items():
        d = root / cls
        d.mkdir(parents=True)
        for i, color in enumerate(colors):
            write_image(d / f"img_{i}.png", color)
    return root
