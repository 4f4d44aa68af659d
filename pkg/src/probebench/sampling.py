"""Seeded, reproducible training subsets.

Two selection modes exist: per-class absolute budgets (b examples per
class, capped at the class size) and stratified fractional splits. Both
draw each class from its own SplitMix64 sub-stream keyed by
(seed, class index), so the result never depends on class iteration order
or on anything happening concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DegenerateInputError
from .rng import class_stream, sample_without_replacement
from .store import EmbeddingDataset


@dataclass(frozen=True)
class Budget:
    """Absolute per-class label budget."""

    b: int

    def __post_init__(self):
        if self.b < 1:
            raise ConsistencyError(f"budget must be >= 1, got {self.b}")

    @property
    def tag(self) -> str:
        return f"budget_{self.b}"


@dataclass(frozen=True)
class Fraction:
    """Stratified fractional split; train_share goes to the first side."""

    train_share: float

    def __post_init__(self):
        if not 0.0 < self.train_share < 1.0:
            raise ConsistencyError(f"train_share must be in (0,1), got {self.train_share}")

    @property
    def tag(self) -> str:
        return f"fraction_{self.train_share:g}"


@dataclass(frozen=True)
class Full:
    """All training rows; deterministic, seed ignored."""

    @property
    def tag(self) -> str:
        return "full"


Condition = Budget | Fraction | Full


@dataclass(frozen=True)
class SampleSelection:
    """One run's reproducible subset of training rows.

    selected is sorted and unique; effective_counts[c] is how many rows of
    class c were actually drawn (min(b, n_c) for budgets, so shortfalls on
    small classes stay auditable).
    """

    selected: tuple[int, ...]
    seed: int
    condition: Condition
    effective_counts: tuple[int, ...]


def _class_pools(ds: EmbeddingDataset) -> list[np.ndarray]:
    return [np.flatnonzero(ds.labels == c) for c in range(ds.n_classes)]


def budget_sample(ds: EmbeddingDataset, b: int, seed: int) -> SampleSelection:
    """Draw min(b, n_c) rows per class, uniformly without replacement."""
    if ds.split_tag != "train":
        raise ConsistencyError(f"budget_sample requires a train split, got {ds.split_tag!r}")
    cond = Budget(b)
    chosen: list[int] = []
    counts: list[int] = []
    for c, pool in enumerate(_class_pools(ds)):
        if pool.size == 0:
            raise DegenerateInputError(f"class {ds.classes[c]!r} has no training rows")
        k = min(b, pool.size)
        stream = class_stream(seed, c)
        chosen.extend(sample_without_replacement(stream, [int(i) for i in pool], k))
        counts.append(k)
    return SampleSelection(
        selected=tuple(sorted(chosen)),
        seed=seed,
        condition=cond,
        effective_counts=tuple(counts),
    )


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def stratified_split(
    ds: EmbeddingDataset, train_share: float, seed: int
) -> tuple[SampleSelection, SampleSelection]:
    """Partition every class round(train_share * n_c) / rest, clamped so
    both sides keep at least one row. Disjoint and exhaustive."""
    cond = Fraction(train_share)
    first: list[int] = []
    second: list[int] = []
    counts_a: list[int] = []
    counts_b: list[int] = []
    for c, pool in enumerate(_class_pools(ds)):
        if pool.size < 2:
            raise DegenerateInputError(
                f"class {ds.classes[c]!r} has {pool.size} rows; stratified split needs >= 2"
            )
        k = _round_half_away(train_share * pool.size)
        k = min(max(k, 1), pool.size - 1)
        stream = class_stream(seed, c)
        shuffled = sample_without_replacement(stream, [int(i) for i in pool], pool.size)
        first.extend(shuffled[:k])
        second.extend(shuffled[k:])
        counts_a.append(k)
        counts_b.append(pool.size - k)
    return (
        SampleSelection(tuple(sorted(first)), seed, cond, tuple(counts_a)),
        SampleSelection(tuple(sorted(second)), seed, cond, tuple(counts_b)),
    )
