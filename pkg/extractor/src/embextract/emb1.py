"""EMB1 writer and manifest emission.

The byte layout is the interchange contract with the benchmarking engine
(little-endian): magic 'EMB1', u32 version=1, u32 n_rows, u32 n_cols,
u32 n_classes, class table (u16 byte-length + UTF-8 per class), labels as
u32, data as f32 row-major. Manifest checksums are 64-bit BLAKE2b hex.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np


def write_emb1(path: str | Path, data: np.ndarray, labels: np.ndarray, classes: list[str]) -> None:
    data = np.ascontiguousarray(data, dtype="<f4")
    labels = np.asarray(labels)
    if data.ndim != 2:
        raise ValueError(f"data must be 2-D, got {data.shape}")
    if len(labels) != data.shape[0]:
        raise ValueError(f"{len(labels)} labels for {data.shape[0]} rows")
    if len(labels) and (labels.min() < 0 or labels.max() >= len(classes)):
        raise ValueError("label outside class catalog")
    parts = [b"EMB1", struct.pack("<IIII", 1, data.shape[0], data.shape[1], len(classes))]
    for name in classes:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
    parts.append(labels.astype("<u4").tobytes())
    parts.append(data.tobytes())
    Path(path).write_bytes(b"".join(parts))


def checksum64(path: str | Path) -> str:
    h = hashlib.blake2b(digest_size=8)
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    path: str | Path,
    dataset_name: str,
    backbone_id: str,
    pooling_descriptor: str,
    dim: int,
    row_counts: dict[str, int],
    emb1_paths: list[Path],
    notes: dict | None = None,
) -> None:
    doc = {
        "dataset_name": dataset_name,
        "backbone_id": backbone_id,
        "pooling_descriptor": pooling_descriptor,
        "dim": dim,
        "row_counts": row_counts,
        "checksums": {p.name: checksum64(p) for p in emb1_paths},
    }
    if notes:
        doc["notes"] = notes
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
