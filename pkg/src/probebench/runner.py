"""Protocol driver: conditions x seeds -> fits -> test metrics -> aggregates.

Each (condition, seed) run is a pure function of its inputs, so sweeps can
fan out over a process pool; results are always gathered back into
canonical condition-major, seed-minor order, making reports independent of
worker count. The fractional condition re-splits per seed (100 distinct
80/20 splits); `full` uses every training row and is a single
deterministic run. Test metrics are always computed on the held-out test
dataset, never on anything drawn from the training side.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConsistencyError, ProbeBenchError
from .metrics import ClassMetrics, ConfusionMatrix, MacroSummary, evaluate
from .probe import ProbeConfig, fit, predict
from .sampling import Budget, Condition, Fraction, Full, budget_sample, stratified_split
from .store import EmbeddingDataset


@dataclass(frozen=True)
class ExperimentConfig:
    conditions: tuple[Condition, ...]
    seeds: tuple[int, ...] = tuple(range(100))
    probe: ProbeConfig = ProbeConfig()
    emit_selections: bool = False
    parallelism: int = 1

    def __post_init__(self):
        if not self.conditions:
            raise ConsistencyError("at least one condition required")
        if not self.seeds:
            raise ConsistencyError("at least one seed required")
        if sum(isinstance(c, Full) for c in self.conditions) > 1:
            raise ConsistencyError("'full' is deterministic; list it at most once")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConsistencyError("duplicate seeds")


@dataclass(frozen=True)
class RunResult:
    condition: Condition
    seed: int
    effective_counts: tuple[int, ...]
    fit_status: str
    fit_iterations: int
    confusion: ConfusionMatrix
    class_metrics: ClassMetrics
    summary: MacroSummary
    duration_s: float
    selected_indices: Optional[tuple[int, ...]] = None


@dataclass(frozen=True)
class ConditionAggregate:
    condition: Condition
    runs: int
    single_run: bool
    macro_f1_mean: float
    macro_f1_std: float
    overall_accuracy_mean: float
    overall_accuracy_std: float
    macro_recall_mean: float
    macro_recall_std: float
    per_class_f1_mean: np.ndarray
    per_class_f1_std: np.ndarray
    mean_confusion_normalized: np.ndarray


@dataclass(frozen=True)
class AggregateResult:
    conditions: tuple[ConditionAggregate, ...] = field(default_factory=tuple)

    def by_tag(self) -> dict[str, ConditionAggregate]:
        return {agg.condition.tag: agg for agg in self.conditions}


def run_single(
    train: EmbeddingDataset,
    test: EmbeddingDataset,
    condition: Condition,
    seed: int,
    probe_cfg: ProbeConfig = ProbeConfig(),
    emit_selection: bool = False,
) -> RunResult:
    """Execute one run: sample (per condition), fit, score on test."""
    if train.classes != test.classes:
        raise ConsistencyError("train and test class catalogs differ")
    if train.dim != test.dim:
        raise ConsistencyError(f"train dim {train.dim} != test dim {test.dim}")
    t0 = time.perf_counter()

    if isinstance(condition, Budget):
        selection = budget_sample(train, condition.b, seed)
    elif isinstance(condition, Fraction):
        # validation side deliberately unused at run time
        selection, _ = stratified_split(train, condition.train_share, seed)
    elif isinstance(condition, Full):
        selection = None
    else:
        raise ConsistencyError(f"unknown condition {condition!r}")

    params = fit(train, selection, probe_cfg)
    y_pred = predict(params, test.data)
    cm, cms, summary = evaluate(test.labels, y_pred, test.n_classes)

    if selection is None:
        counts = tuple(int(c) for c in train.class_counts())
        indices = tuple(range(train.n)) if emit_selection else None
    else:
        counts = selection.effective_counts
        indices = selection.selected if emit_selection else None

    return RunResult(
        condition=condition,
        seed=seed,
        effective_counts=counts,
        fit_status=params.fit_info.status,
        fit_iterations=params.fit_info.iterations,
        confusion=cm,
        class_metrics=cms,
        summary=summary,
        duration_s=time.perf_counter() - t0,
        selected_indices=indices,
    )


class SweepError(ProbeBenchError):
    """A run failed; carries its (condition, seed) coordinate."""

    def __init__(self, tag: str, seed: int, cause: BaseException):
        super().__init__(f"run ({tag}, seed={seed}) failed: {cause}")
        self.condition_tag = tag
        self.seed = seed


_POOL_DATA: dict = {}


def _pool_init(train: EmbeddingDataset, test: EmbeddingDataset, probe_cfg: ProbeConfig,
               emit_selections: bool) -> None:
    _POOL_DATA["args"] = (train, test, probe_cfg, emit_selections)


def _pool_run(task: tuple[Condition, int]) -> RunResult:
    train, test, probe_cfg, emit = _POOL_DATA["args"]
    condition, seed = task
    return run_single(train, test, condition, seed, probe_cfg, emit)


def sweep_pairs(cfg: ExperimentConfig) -> list[tuple[Condition, int]]:
    """Canonical (condition, seed) grid; `full` collapses to one seed-0 run."""
    pairs: list[tuple[Condition, int]] = []
    for cond in cfg.conditions:
        if isinstance(cond, Full):
            pairs.append((cond, 0))
        else:
            pairs.extend((cond, seed) for seed in cfg.seeds)
    return pairs

def run_sweep(
    cfg: ExperimentConfig,
    train: EmbeddingDataset,
    test: EmbeddingDataset,
) -> list[RunResult]:
    """All runs of the grid, in canonical order regardless of execution order."""
    pairs = sweep_pairs(cfg)
    if cfg.parallelism <= 1:
        results = []
        for condition, seed in pairs:
            try:
                results.append(
                    run_single(train, test, condition, seed, cfg.probe, cfg.emit_selections)
                )
            except Exception as exc:
                raise SweepError(condition.tag, seed, exc) from exc
        return results

    with ProcessPoolExecutor(
        max_workers=cfg.parallelism,
        initializer=_pool_init,
        initargs=(train, test, cfg.probe, cfg.emit_selections),
    ) as pool:
        futures = {pool.submit(_pool_run, pair): pair for pair in pairs}
        gathered: dict[tuple[str, int], RunResult] = {}
        for fut, (condition, seed) in futures.items():
            try:
                gathered[(condition.tag, seed)] = fut.result()
            except Exception as exc:
                pool.shutdown(cancel_futures=True)
                raise SweepError(condition.tag, seed, exc) from exc
    return [gathered[(condition.tag, seed)] for condition, seed in pairs]


def _mean_std(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    std = 0.0 if len(values) < 2 else float(values.std(ddof=1))
    return mean, std


def aggregate(results: Sequence[RunResult]) -> AggregateResult:
    """Group by condition (first-appearance order); n-1 standard deviations.

    The mean confusion matrix is the element-wise mean of row-normalized
    per-run matrices.
    """
    if not results:
        raise ConsistencyError("cannot aggregate zero results")
    groups: dict[str, list[RunResult]] = {}
    order: list[str] = []
    for r in results:
        tag = r.condition.tag
        if tag not in groups:
            groups[tag] = []
            order.append(tag)
        groups[tag].append(r)

    aggs = []
    for tag in order:
        runs = groups[tag]
        macro_f1 = np.array([r.summary.macro_f1 for r in runs])
        acc = np.array([r.summary.overall_accuracy for r in runs])
        recall = np.array([r.summary.macro_recall for r in runs])
        per_class = np.vstack([r.class_metrics.f1 for r in runs])
        norm_cms = np.stack([r.confusion.row_normalized() for r in runs])
        f1_m, f1_s = _mean_std(macro_f1)
        acc_m, acc_s = _mean_std(acc)
        rec_m, rec_s = _mean_std(recall)
        aggs.append(
            ConditionAggregate(
                condition=runs[0].condition,
                runs=len(runs),
                single_run=len(runs) == 1,
                macro_f1_mean=f1_m,
                macro_f1_std=f1_s,
                overall_accuracy_mean=acc_m,
                overall_accuracy_std=acc_s,
                macro_recall_mean=rec_m,
                macro_recall_std=rec_s,
                per_class_f1_mean=per_class.mean(axis=0),
                per_class_f1_std=(
                    per_class.std(axis=0, ddof=1)
                    if len(runs) > 1
                    else np.zeros(per_class.shape[1])
                ),
                mean_confusion_normalized=norm_cms.mean(axis=0),
            )
        )
    return AggregateResult(conditions=tuple(aggs))
