"""Class-weighted, L2-regularized multinomial logistic regression.

The objective over a parameter vector (W row-major, then intercepts) is

    J = sum_i s[y_i] * (-log p_{y_i}(x_i)) + ||W||_F^2 / (2C)

with p = softmax(W x + intercept) evaluated through the log-sum-exp
stabilization. The penalty is taken against the unscaled weighted loss sum
and intercepts are never regularized; larger C means a weaker penalty.
Balanced class weights s_c = N / (K * n_c) are computed on the selected
training subset, so each class contributes equally to the loss no matter
how imbalanced the draw. Fits start from zero parameters, which together
with the convex objective makes them fully deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConsistencyError, DegenerateInputError, NumericalError, ShapeError
from .lbfgs import OptimizerConfig, OptimizeOutcome, minimize
from .sampling import SampleSelection
from .store import EmbeddingDataset

WEIGHTING_MODES = ("uniform", "balanced")


@dataclass(frozen=True)
class ProbeConfig:
    C: float = 10.0
    class_weighting: str = "balanced"
    max_iterations: int = 100
    grad_tolerance: float = 1e-4

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.class_weighting not in WEIGHTING_MODES:
            raise ValueError(f"class_weighting must be one of {WEIGHTING_MODES}")


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights; all entries strictly positive."""

    s: np.ndarray

    @classmethod
    def uniform(cls, n_classes: int) -> "ClassWeights":
        return cls(np.ones(n_classes, dtype=np.float64))

    @classmethod
    def balanced(cls, counts: np.ndarray) -> "ClassWeights":
        counts = np.asarray(counts, dtype=np.int64)
        if (counts <= 0).any():
            empty = int(np.flatnonzero(counts <= 0)[0])
            raise DegenerateInputError(f"class {empty} has no selected rows; cannot weight it")
        n_total = int(counts.sum())
        k = len(counts)
        return cls(n_total / (k * counts.astype(np.float64)))

    @classmethod
    def for_mode(cls, mode: str, counts: np.ndarray) -> "ClassWeights":
        if mode == "uniform":
            if (np.asarray(counts) <= 0).any():
                empty = int(np.flatnonzero(np.asarray(counts) <= 0)[0])
                raise DegenerateInputError(f"class {empty} has no selected rows")
            return cls.uniform(len(counts))
        return cls.balanced(counts)


@dataclass(frozen=True)
class FitInfo:
    status: str
    iterations: int
    final_objective: float
    grad_inf_norm: float


@dataclass(frozen=True)
class ModelParams:
    """Fitted probe: weight matrix W (K x d), intercepts (K), class catalog."""

    W: np.ndarray
    intercept: np.ndarray
    classes: tuple[str, ...]
    fit_info: Optional[FitInfo] = None

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def to_json(self, probe_cfg: Optional[ProbeConfig] = None) -> str:
        doc = {
            "schema": "probebench.model/1",
            "classes": list(self.classes),
            "dim": self.dim,
            "C": probe_cfg.C if probe_cfg else None,
            "class_weighting": probe_cfg.class_weighting if probe_cfg else None,
            "weights": [[float(v) for v in row] for row in self.W],
            "intercepts": [float(v) for v in self.intercept],
        }
        if self.fit_info is not None:
            doc["fit"] = {
                "status": self.fit_info.status,
                "iterations": self.fit_info.iterations,
                "final_objective": self.fit_info.final_objective,
                "grad_inf_norm": self.fit_info.grad_inf_norm,
            }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        doc = json.loads(text)
        W = np.asarray(doc["weights"], dtype=np.float64)
        intercept = np.asarray(doc["intercepts"], dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != len(doc["classes"]) or len(intercept) != W.shape[0]:
            raise ConsistencyError("model document has inconsistent shapes")
        info = None
        if "fit" in doc:
            f = doc["fit"]
            info = FitInfo(f["status"], f["iterations"], f["final_objective"], f["grad_inf_norm"])
        return cls(W=W, intercept=intercept, classes=tuple(doc["classes"]), fit_info=info)


def pack_params(W: np.ndarray, intercept: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(W, dtype=np.float64).ravel(), intercept])


def unpack_params(vec: np.ndarray, n_classes: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    if vec.shape != (n_classes * dim + n_classes,):
        raise ShapeError(f"parameter vector length {vec.shape} != K*d+K")
    return vec[: n_classes * dim].reshape(n_classes, dim), vec[n_classes * dim :]


def objective_and_gradient(
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    weights: ClassWeights,
    C: float,
    _skip_checks: bool = False,
) -> tuple[float, np.ndarray]:
    """Weighted cross-entropy plus ||W||^2/(2C); exact analytic gradient."""
    params = np.asarray(params, dtype=np.float64)
    n, d = X.shape
    k = len(weights.s)
    if not _skip_checks:
        if not np.all(np.isfinite(params)) or not np.all(np.isfinite(X)):
            raise NumericalError("non-finite input to objective")
    W, b = unpack_params(params, k, d)

    logits = X @ W.T + b  # (n, k)
    m = logits.max(axis=1, keepdims=True)
    stable = np.exp(logits - m)
    sum_exp = stable.sum(axis=1)
    log_z = m[:, 0] + np.log(sum_exp)
    s_i = weights.s[y]  # per-sample weight

    loss = float(s_i @ (log_z - logits[np.arange(n), y]))
    value = loss + float(np.sum(W * W)) / (2.0 * C)

    P = stable / sum_exp[:, None]
    G = s_i[:, None] * P
    G[np.arange(n), y] -= s_i
    grad_W = G.T @ X + W / C
    grad_b = G.sum(axis=0)
    return value, pack_params(grad_W, grad_b)


def fit(
    ds: EmbeddingDataset,
    selection: Optional[SampleSelection],
    cfg: ProbeConfig = ProbeConfig(),
) -> ModelParams:
    """Fit the probe on the selected rows (all rows when selection is None).

    Class weights always come from the selected subset's class counts, and
    the optimizer starts from zero parameters.
    """
    if selection is None:
        X, y = ds.data, ds.labels
    else:
        idx = np.asarray(selection.selected, dtype=np.int64)
        if len(idx) and (idx.min() < 0 or idx.max() >= ds.n):
            raise ConsistencyError("selection indices outside the dataset")
        X, y = ds.data[idx], ds.labels[idx]
    if len(y) == 0:
        raise DegenerateInputError("cannot fit on an empty selection")
    if not np.all(np.isfinite(X)):
        raise NumericalError("training matrix contains non-finite values")

    k = ds.n_classes
    counts = np.bincount(y, minlength=k)
    weights = ClassWeights.for_mode(cfg.class_weighting, counts)

    def obj(vec: np.ndarray) -> tuple[float, np.ndarray]:
        return objective_and_gradient(vec, X, y, weights, cfg.C, _skip_checks=True)

    x0 = np.zeros(k * ds.dim + k, dtype=np.float64)
    outcome: OptimizeOutcome = minimize(
        obj,
        x0,
        OptimizerConfig(max_iterations=cfg.max_iterations, grad_tolerance=cfg.grad_tolerance),
    )
    W, b = unpack_params(outcome.x_final, k, ds.dim)
    return ModelParams(
        W=W,
        intercept=b,
        classes=tuple(ds.classes),
        fit_info=FitInfo(
            status=outcome.status,
            iterations=outcome.iterations_used,
            final_objective=outcome.f_final,
            grad_inf_norm=outcome.grad_inf_norm,
        ),
    )


def _logits(params: ModelParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.dim:
        raise ShapeError(f"X has shape {X.shape}, model expects (*, {params.dim})")
    return X @ params.W.T + params.intercept


def predict_proba(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Softmax probabilities; each row sums to 1 within 1e-9."""
    logits = _logits(params, X)
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=1, keepdims=True)


def predict(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Argmax class per row; exact ties resolve to the lowest class index."""
    return np.argmax(_logits(params, X), axis=1).astype(np.int64)
