"""Adapter behavior on a locally-constructed tiny ViT (no weight download):
prefix-token stripping, dimensions, and determinism of the frozen forward."""

import numpy as np
import pytest

torch = pytest.importorskip("torch")
transformers = pytest.importorskip("transformers")

from embextract.backbone import hf_token_adapter  # noqa: E402


@pytest.fixture(scope="module")
def tiny_vit():
    from transformers import DINOv3ViTConfig, DINOv3ViTModel

    cfg = DINOv3ViTConfig(
        hidden_size=32,
        intermediate_size=64,
        num_hidden_layers=1,
        num_attention_heads=2,
        image_size=32,
        patch_size=16,
        num_register_tokens=4,
    )
    torch.manual_seed(0)
    model = DINOv3ViTModel(cfg).eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


def test_prefix_tokens_stripped(tiny_vit):
    num_prefix = 1 + tiny_vit.config.num_register_tokens
    adapter = hf_token_adapter(tiny_vit, num_prefix)
    batch = np.random.default_rng(0).normal(size=(2, 3, 32, 32)).astype(np.float32)
    tokens = adapter(batch)
    # 32/16 = 2 patches per side -> 4 spatial tokens after stripping 1+4
    assert tokens.shape == (2, 4, 32)
    with torch.no_grad():
        raw = tiny_vit(pixel_values=torch.from_numpy(batch)).last_hidden_state
    assert raw.shape[1] == 4 + num_prefix
    assert np.allclose(tokens, raw[:, num_prefix:, :].numpy())


def test_frozen_forward_deterministic(tiny_vit):
    adapter = hf_token_adapter(tiny_vit, 1 + tiny_vit.config.num_register_tokens)
    batch = np.random.default_rng(1).normal(size=(1, 3, 32, 32)).astype(np.float32)
    assert np.array_equal(adapter(batch), adapter(batch))
