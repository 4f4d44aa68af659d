"""Embedding dataset model and its on-disk formats.

The canonical container is EMB1, a little-endian binary layout:

    magic 'EMB1' (4 ASCII bytes)
    u32 version = 1
    u32 n_rows
    u32 n_cols
    u32 n_classes
    class table: per class, u16 byte-length + UTF-8 bytes
    labels: n_rows x u32
    data:   n_rows x n_cols x f32, row-major

Feature values live as f32 on disk and are promoted to f64 in memory for
all computation. Saving is deterministic: the same dataset always produces
the same bytes. CSV (header ``label,f0,...,f{d-1}``, label column holding
class-name strings) is supported as an interchange format.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConsistencyError,
    DegenerateInputError,
    FormatError,
    ParseError,
    TruncatedFileError,
)

_MAGIC = b"EMB1"
_VERSION = 1

SPLIT_TAGS = ("train", "test", "unsplit")


@dataclass(eq=False)
class EmbeddingDataset:
    """Immutable-by-convention bundle of embeddings, labels and class names.

    data is float64 (n, d); labels int64 (n,) with values in [0, K);
    classes gives the frozen catalog order all label indices refer to.
    """

    data: np.ndarray
    labels: np.ndarray
    classes: list[str]
    split_tag: str = "unsplit"

    def __post_init__(self):
        self.data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.classes = list(self.classes)
        if self.data.ndim != 2:
            raise ConsistencyError(f"data must be 2-D, got ndim={self.data.ndim}")
        if self.labels.ndim != 1 or len(self.labels) != self.data.shape[0]:
            raise ConsistencyError(
                f"labels length {len(self.labels)} != row count {self.data.shape[0]}"
            )
        if self.split_tag not in SPLIT_TAGS:
            raise ConsistencyError(f"unknown split_tag {self.split_tag!r}")
        k = len(self.classes)
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= k):
            bad = int(self.labels.max() if self.labels.max() >= k else self.labels.min())
            raise ConsistencyError(f"label {bad} outside [0, {k})")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_counts(self) -> np.ndarray:
        """Per-class row counts in catalog order."""
        return np.bincount(self.labels, minlength=self.n_classes).astype(np.int64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingDataset):
            return NotImplemented
        return (
            self.split_tag == other.split_tag
            and self.classes == other.classes
            and np.array_equal(self.labels, other.labels)
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
        )


def normalize_rows(ds: EmbeddingDataset) -> EmbeddingDataset:
    """Return a copy of ds with every row scaled to unit Euclidean norm.

    Rows whose norm is exactly zero (including squared-sum underflow) are
    rejected rather than skipped: silently dropping a row would
    desynchronize the label vector.
    """
    norms = np.linalg.norm(ds.data, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateInputError(f"row {int(zero[0])} has zero norm")
    return EmbeddingDataset(
        data=ds.data / norms[:, None],
        labels=ds.labels.copy(),
        classes=ds.classes,
        split_tag=ds.split_tag,
    )


def save_binary(ds: EmbeddingDataset, path: str | Path) -> None:
    """Write ds to path in the EMB1 layout. Same dataset -> same bytes."""
    k = ds.n_classes
    if len(ds.labels) and ds.labels.max() >= k:
        raise ConsistencyError(f"label {int(ds.labels.max())} outside [0, {k})")
    parts = [_MAGIC, struct.pack("<IIII", _VERSION, ds.n, ds.dim, k)]
    for name in ds.classes:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ConsistencyError(f"class name too long ({len(raw)} bytes)")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(ds.labels.astype("<u4").tobytes())
    parts.append(np.ascontiguousarray(ds.data, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_binary(path: str | Path) -> EmbeddingDataset:
    """Load an EMB1 file; byte-identical files produce identical datasets."""
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {_MAGIC!r}")
    if len(blob) < 20:
        raise TruncatedFileError(f"{path}: header truncated at {len(blob)} bytes")
    version, n, d, k = struct.unpack_from("<IIII", blob, 4)
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported EMB1 version {version}")
    pos = 20
    classes = []
    for i in range(k):
        if pos + 2 > len(blob):
            raise TruncatedFileError(f"{path}: class table truncated at entry {i}")
        (nbytes,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        if pos + nbytes > len(blob):
            raise TruncatedFileError(f"{path}: class name {i} truncated")
        classes.append(blob[pos : pos + nbytes].decode("utf-8"))
        pos += nbytes
    need = n * 4 + n * d * 4
    if len(blob) - pos != need:
        raise TruncatedFileError(
            f"{path}: payload is {len(blob) - pos} bytes, header declares {need}"
        )
    labels = np.frombuffer(blob, dtype="<u4", count=n, offset=pos).astype(np.int64)
    pos += n * 4
    data = np.frombuffer(blob, dtype="<f4", count=n * d, offset=pos)
    data = data.reshape(n, d).astype(np.float64)
    if len(labels) and labels.max() >= k:
        raise ConsistencyError(f"{path}: label {int(labels.max())} outside [0, {k})")
    return EmbeddingDataset(data=data, labels=labels, classes=classes)


def load_csv(path: str | Path) -> EmbeddingDataset:
    """Load the CSV interchange format.

    The class catalog is built from distinct label names in first-appearance
    order; feature values are parsed as decimal reals. Row numbers in error
    messages are 1-based and include the header.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(header) < 1 or header[0] != "label":
            raise ParseError(f"{path}: row 1: header must start with 'label'")
        d = len(header) - 1
        expected = ["label"] + [f"f{i}" for i in range(d)]
        if header != expected:
            raise ParseError(f"{path}: row 1: header must be label,f0,...,f{d - 1}")
        catalog: dict[str, int] = {}
        labels: list[int] = []
        rows: list[np.ndarray] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 1:
                raise ParseError(
                    f"{path}: row {lineno}: expected {d + 1} fields, got {len(row)}"
                )
            name = row[0]
            if name not in catalog:
                catalog[name] = len(catalog)
            labels.append(catalog[name])
            try:
                rows.append(np.array(row[1:], dtype=np.float64))
            except ValueError:
                raise ParseError(f"{path}: row {lineno}: non-numeric feature value") from None
    data = np.vstack(rows) if rows else np.empty((0, d), dtype=np.float64)
    return EmbeddingDataset(
        data=data,
        labels=np.array(labels, dtype=np.int64),
        classes=list(catalog),
    )


def save_csv(ds: EmbeddingDataset, path: str | Path) -> None:
    """Write the CSV interchange format (inverse of load_csv for datasets
    whose catalog order matches first appearance in row order)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(ds.dim)])
        for i in range(ds.n):
            writer.writerow([ds.classes[ds.labels[i]]] + [repr(float(v)) for v in ds.data[i]])


def file_checksum(path: str | Path) -> str:
    """64-bit content checksum as 16 hex chars (BLAKE2b, 8-byte digest)."""
    h = hashlib.blake2b(digest_size=8)
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Manifest:
    """Companion JSON document describing a set of EMB1 files.

    checksums keys are file paths relative to the manifest's directory.
    """

    dataset_name: str
    backbone_id: str
    pooling_descriptor: str
    dim: int
    row_counts: dict[str, int] = field(default_factory=dict)
    checksums: dict[str, str] = field(default_factory=dict)
    notes: dict[str, object] = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "dataset_name": self.dataset_name,
            "backbone_id": self.backbone_id,
            "pooling_descriptor": self.pooling_descriptor,
            "dim": self.dim,
            "row_counts": self.row_counts,
            "checksums": self.checksums,
        }
        if self.notes:
            doc["notes"] = self.notes
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest is not valid JSON: {exc}") from None
        missing = {"dataset_name", "backbone_id", "pooling_descriptor", "dim"} - doc.keys()
        if missing:
            raise FormatError(f"manifest missing fields: {sorted(missing)}")
        return cls(
            dataset_name=doc["dataset_name"],
            backbone_id=doc["backbone_id"],
            pooling_descriptor=doc["pooling_descriptor"],
            dim=int(doc["dim"]),
            row_counts={k: int(v) for k, v in doc.get("row_counts", {}).items()},
            checksums=dict(doc.get("checksums", {})),
            notes=dict(doc.get("notes", {})),
        )


def build_manifest(
    dataset_name: str,
    files: dict[str, str | Path],
    backbone_id: str = "unknown",
    pooling_descriptor: str = "unknown",
    base_dir: str | Path | None = None,
) -> Manifest:
    """Construct a Manifest for {split_tag: emb1 path}, computing checksums.

    All files must share one embedding dimension.
    """
    dim = None
    row_counts: dict[str, int] = {}
    checksums: dict[str, str] = {}
    for tag, p in files.items():
        ds = load_binary(p)
        if dim is None:
            dim = ds.dim
        elif ds.dim != dim:
            raise ConsistencyError(f"{p}: dim {ds.dim} != {dim} of earlier files")
        row_counts[tag] = ds.n
        rel = Path(p).name if base_dir is None else str(Path(p).relative_to(base_dir))
        checksums[rel] = file_checksum(p)
    return Manifest(
        dataset_name=dataset_name,
        backbone_id=backbone_id,
        pooling_descriptor=pooling_descriptor,
        dim=int(dim) if dim is not None else 0,
        row_counts=row_counts,
        checksums=checksums,
    )


def verify_manifest(manifest: Manifest, base_dir: str | Path) -> None:
    """Raise ConsistencyError if any referenced file fails its checksum or
    contradicts the declared dimension."""
    base = Path(base_dir)
    for rel, want in manifest.checksums.items():
        p = base / rel
        got = file_checksum(p)
        if got != want:
            raise ConsistencyError(f"{p}: checksum {got} != manifest {want}")
        ds = load_binary(p)
        if ds.dim != manifest.dim:
            raise ConsistencyError(f"{p}: dim {ds.dim} != manifest dim {manifest.dim}")
