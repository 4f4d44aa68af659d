"""Frozen ViT backbone adapter.

A Backbone bundles the preprocessing transform and a batched
patch-token function behind plain numpy arrays, so the extraction loop
never touches framework objects. The default loader wraps a transformers
vision model with frozen weights; class and register tokens are stripped
so only spatial patch tokens reach the pooling stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from PIL import Image

DEFAULT_BACKBONE = "facebook/dinov3-vitb16-pretrain-lvd1689m"

# standard inference transform when the backbone ships no processor config
_FALLBACK_RESIZE = 256
_FALLBACK_CROP = 224
_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class Backbone:
    """Preprocessing + batched patch-token inference, framework-agnostic.

    preprocess: PIL RGB image -> float32 CHW array.
    patch_tokens: float32 (B, C, H, W) -> float32 (B, n_patches, dim),
    spatial tokens only.
    """

    backbone_id: str
    dim: int
    transform_desc: str
    preprocess: Callable[[Image.Image], np.ndarray]
    patch_tokens: Callable[[np.ndarray], np.ndarray]


def _fallback_transform() -> tuple[Callable[[Image.Image], np.ndarray], str]:
    from torchvision import transforms

    tf = transforms.Compose([
        transforms.Resize(_FALLBACK_RESIZE, interpolation=transforms.InterpolationMode.BICUBIC),
        transforms.CenterCrop(_FALLBACK_CROP),
        transforms.ToTensor(),
        transforms.Normalize(mean=_IMAGENET_MEAN, std=_IMAGENET_STD),
    ])
    desc = (
        f"resize={_FALLBACK_RESIZE}:bicubic,center_crop={_FALLBACK_CROP},"
        f"normalize=mean{_IMAGENET_MEAN}/std{_IMAGENET_STD}"
    )
    return (lambda img: tf(img).numpy()), desc


def hf_token_adapter(model, num_prefix_tokens: int):
    """Batched forward returning spatial tokens from last_hidden_state.

    num_prefix_tokens = 1 (class token) + register tokens; those lead the
    sequence and are dropped.
    """
    import torch

    def patch_tokens(batch: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            out = model(pixel_values=torch.from_numpy(batch))
        tokens = out.last_hidden_state[:, num_prefix_tokens:, :]
        return tokens.cpu().numpy()

    return patch_tokens


def load_backbone(backbone_id: str = DEFAULT_BACKBONE, device: str = "cpu") -> Backbone:
    """Load a frozen transformers vision model by id (or local path).

    Missing weights are fatal; no fine-tuning ever happens here.
    """
    import torch
    from transformers import AutoModel

    try:
        model = AutoModel.from_pretrained(backbone_id)
    except Exception as exc:
        raise RuntimeError(f"cannot obtain backbone weights for {backbone_id!r}: {exc}") from exc
    model.eval().to(device)
    for p in model.parameters():
        p.requires_grad_(False)

    num_register = int(getattr(model.config, "num_register_tokens", 0))
    num_prefix = 1 + num_register
    dim = int(model.config.hidden_size)

    preprocess, desc = _build_preprocess(backbone_id)
    return Backbone(
        backbone_id=backbone_id,
        dim=dim,
        transform_desc=desc,
        preprocess=preprocess,
        patch_tokens=hf_token_adapter(model, num_prefix),
    )


def _build_preprocess(backbone_id: str):
    """Prefer the backbone's published processor; fall back to the standard
    resize/center-crop/normalize inference transform."""
    try:
        from transformers import AutoImageProcessor

        proc = AutoImageProcessor.from_pretrained(backbone_id)

        def preprocess(img: Image.Image) -> np.ndarray:
            out = proc(images=img, return_tensors="np")
            return out["pixel_values"][0].astype(np.float32)

        import json as _json

        desc = "hf_processor:" + _json.dumps(proc.to_dict(), sort_keys=True, default=str)
        return preprocess, desc
    except Exception:
        return _fallback_transform()
