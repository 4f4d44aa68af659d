"""Confusion matrices, per-class P/R/F1, macro summaries, baseline deltas.

Conventions: confusion rows are true classes, columns predicted; zero
denominators in precision/recall/F1 yield 0, so a never-predicted class
drags macro scores down instead of being ignored. Matrices are stored as
raw counts; row-normalization happens only at report emission.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DegenerateInputError, ShapeError


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (K, K) int64, rows true, cols predicted

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    def total(self) -> int:
        return int(self.counts.sum())

    def row_normalized(self) -> np.ndarray:
        """Counts divided by row sums; all-zero rows stay zero."""
        sums = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        out = np.zeros_like(self.counts, dtype=np.float64)
        np.divide(self.counts, sums, out=out, where=sums > 0)
        return out


@dataclass(frozen=True)
class ClassMetrics:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray  # per-class true counts


@dataclass(frozen=True)
class MacroSummary:
    macro_f1: float
    macro_precision: float
    macro_recall: float  # balanced accuracy
    overall_accuracy: float


def confusion(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"y_true {y_true.shape} vs y_pred {y_pred.shape}")
    if len(y_true) and not (
        0 <= y_true.min()
        and 0 <= y_pred.min()
        and y_true.max() < n_classes
        and y_pred.max() < n_classes
    ):
        raise ConsistencyError("label value outside [0, K)")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def per_class_prf(cm: ConfusionMatrix) -> ClassMetrics:
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    pred_tot = counts.sum(axis=0)
    true_tot = counts.sum(axis=1)
    precision = np.divide(tp, pred_tot, out=np.zeros_like(tp), where=pred_tot > 0)
    recall = np.divide(tp, true_tot, out=np.zeros_like(tp), where=true_tot > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros_like(tp), where=pr > 0)
    return ClassMetrics(
        precision=precision,
        recall=recall,
        f1=f1,
        support=cm.counts.sum(axis=1),
    )


def summarize(cms: ClassMetrics, cm: ConfusionMatrix) -> MacroSummary:
    total = cm.total()
    if total == 0:
        raise DegenerateInputError("cannot summarize an empty confusion matrix")
    if len(cms.f1) != cm.n_classes:
        raise ConsistencyError("class metrics and confusion matrix disagree on K")
    return MacroSummary(
        macro_f1=float(cms.f1.mean()),
        macro_precision=float(cms.precision.mean()),
        macro_recall=float(cms.recall.mean()),
        overall_accuracy=float(np.trace(cm.counts) / total),
    )


def evaluate(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int):
    """Convenience: confusion -> per-class -> macro, returned together."""
    cm = confusion(y_true, y_pred, n_classes)
    cms = per_class_prf(cm)
    return cm, cms, summarize(cms, cm)


@dataclass(frozen=True)
class BaselineReference:
    """Published per-class F1 of a supervised baseline; ingested, never computed."""

    name: str
    classes: tuple[str, ...]
    per_class_f1: np.ndarray
    macro_f1: float

    @classmethod
    def from_json(cls, text: str) -> "BaselineReference":
        doc = json.loads(text)
        per_class = doc["per_class_f1"]
        classes = tuple(per_class)
        return cls(
            name=doc["name"],
            classes=classes,
            per_class_f1=np.array([float(per_class[c]) for c in classes]),
            macro_f1=float(doc["macro_f1"]),
        )


def delta_f1(
    ours: ClassMetrics, baseline: BaselineReference, classes: list[str] | tuple[str, ...]
) -> np.ndarray:
    """Per-class F1(ours) - F1(baseline); catalogs must match exactly."""
    if tuple(classes) != baseline.classes:
        ours_only = [c for c in classes if c not in baseline.classes]
        base_only = [c for c in baseline.classes if c not in classes]
        raise ConsistencyError(
            "class catalogs differ: "
            f"missing from baseline {ours_only}, missing from ours {base_only}"
            if (ours_only or base_only)
            else "class catalogs are ordered differently"
        )
    if len(ours.f1) != len(baseline.per_class_f1):
        raise ConsistencyError("per-class F1 lengths differ")
    return ours.f1 - baseline.per_class_f1
