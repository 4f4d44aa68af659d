"""Image-tree to EMB1 extraction.

Walks a class-per-folder tree in sorted (class, filename) order, runs
batched frozen-backbone inference, and pools each image's spatial patch
tokens: L2-normalize every token individually, average them, then
L2-normalize the mean. One 1 x dim row per image. Undecodable images are
skipped with a warning and counted in the manifest; everything else is
deterministic given the same weights and preprocessing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backbone import Backbone
from .emb1 import write_emb1, write_manifest

log = logging.getLogger("embextract")

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png", ".bmp", ".webp"}

POOLING_DESCRIPTOR = "patch_tokens:l2_per_token,mean,l2_final"


@dataclass
class ExtractionJob:
    image_root: Path
    out_path: Path
    manifest_path: Path | None = None
    batch_size: int = 16
    dataset_name: str | None = None
    split_tag: str = "train"

    def __post_init__(self):
        self.image_root = Path(self.image_root)
        self.out_path = Path(self.out_path)
        if self.manifest_path is None:
            self.manifest_path = self.out_path.with_suffix(self.out_path.suffix + ".manifest.json")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ExtractionResult:
    n_rows: int
    n_skipped: int
    classes: list[str] = field(default_factory=list)


def scan_tree(image_root: Path) -> tuple[list[str], list[tuple[int, Path]]]:
    """Classes from subfolder names (sorted) and (label, path) pairs in
    sorted (class, filename) order. Only supported extensions count."""
    root = Path(image_root)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a directory")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise ValueError(f"{root} has no class subfolders")
    classes = [d.name for d in class_dirs]
    items: list[tuple[int, Path]] = []
    for label, d in enumerate(class_dirs):
        files = sorted(p for p in d.iterdir()
                       if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS)
        if not files:
            raise ValueError(f"class folder {d} holds no supported images")
        items.extend((label, p) for p in files)
    return classes, items


def pool_patch_tokens(tokens: np.ndarray) -> np.ndarray:
    """(B, P, D) spatial tokens -> (B, D) unit-norm rows.

    Each token is L2-normalized, tokens are averaged, and the mean is
    L2-normalized again; computed in float64, emitted as float64.
    """
    t = np.asarray(tokens, dtype=np.float64)
    norms = np.linalg.norm(t, axis=2, keepdims=True)
    if (norms == 0).any():
        raise ValueError("zero-norm patch token")
    mean = (t / norms).mean(axis=1)
    mean_norms = np.linalg.norm(mean, axis=1, keepdims=True)
    if (mean_norms == 0).any():
        raise ValueError("zero-norm pooled vector")
    return mean / mean_norms


def extract(job: ExtractionJob, backbone: Backbone) -> ExtractionResult:
    """Run the job; writes the EMB1 file and its manifest."""
    classes, items = scan_tree(job.image_root)
    rows: list[np.ndarray] = []
    labels: list[int] = []
    skipped = 0

    batch_imgs: list[np.ndarray] = []
    batch_labels: list[int] = []

    def flush():
        if not batch_imgs:
            return
        stacked = np.stack(batch_imgs).astype(np.float32)
        tokens = backbone.patch_tokens(stacked)
        rows.append(pool_patch_tokens(tokens))
        labels.extend(batch_labels)
        batch_imgs.clear()
        batch_labels.clear()

    for label, path in items:
        try:
            with Image.open(path) as img:
                pixel = backbone.preprocess(img.convert("RGB"))
        except (UnidentifiedImageError, OSError) as exc:
            log.warning("skipping undecodable image %s: %s", path, exc)
            skipped += 1
            continue
        batch_imgs.append(pixel)
        batch_labels.append(label)
        if len(batch_imgs) >= job.batch_size:
            flush()
    flush()

    data = np.vstack(rows) if rows else np.empty((0, backbone.dim), dtype=np.float64)
    write_emb1(job.out_path, data, np.asarray(labels, dtype=np.int64), classes)
    notes = {"transform": backbone.transform_desc}
    if skipped:
        notes["skipped_undecodable"] = skipped
    write_manifest(
        job.manifest_path,
        dataset_name=job.dataset_name or job.image_root.name,
        backbone_id=backbone.backbone_id,
        pooling_descriptor=POOLING_DESCRIPTOR,
        dim=backbone.dim,
        row_counts={job.split_tag: data.shape[0]},
        emb1_paths=[job.out_path],
        notes=notes,
    )
    log.info("wrote %s: %d rows, %d classes, %d skipped",
             job.out_path, data.shape[0], len(classes), skipped)
    return ExtractionResult(n_rows=data.shape[0], n_skipped=skipped, classes=classes)
