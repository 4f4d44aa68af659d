"""Sweep report and plot-data emission.

All emitted files are deterministic functions of the experiment inputs:
per-run wall-clock durations and worker counts deliberately never appear,
so a sweep re-run (serial or parallel) reproduces every artifact
byte-for-byte. Plot-data files are plain CSV for external tooling.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from .errors import ConsistencyError, FormatError
from .metrics import BaselineReference
from .runner import AggregateResult, ExperimentConfig, RunResult, aggregate
from .sampling import Budget


def _run_record(r: RunResult, emit_selection: bool) -> dict:
    rec = {
        "condition": r.condition.tag,
        "seed": r.seed,
        "effective_counts": list(r.effective_counts),
        "fit_status": r.fit_status,
        "fit_iterations": r.fit_iterations,
        "macro_f1": r.summary.macro_f1,
        "overall_accuracy": r.summary.overall_accuracy,
        "macro_recall": r.summary.macro_recall,
        "macro_precision": r.summary.macro_precision,
        "per_class_f1": [float(v) for v in r.class_metrics.f1],
        "confusion": [[int(v) for v in row] for row in r.confusion.counts],
    }
    if emit_selection and r.selected_indices is not None:
        rec["selected_indices"] = list(r.selected_indices)
    return rec


def sweep_report_doc(
    cfg: ExperimentConfig,
    results: Sequence[RunResult],
    classes: Sequence[str],
    aggs: AggregateResult | None = None,
) -> dict:
    """Assemble the canonical report document (config echo, runs, aggregates)."""
    if aggs is None:
        aggs = aggregate(results)
    return {
        "schema": "probebench.sweep/1",
        "config": {
            "conditions": [c.tag for c in cfg.conditions],
            "seeds": list(cfg.seeds),
            "probe": {
                "C": cfg.probe.C,
                "class_weighting": cfg.probe.class_weighting,
                "max_iterations": cfg.probe.max_iterations,
                "grad_tolerance": cfg.probe.grad_tolerance,
            },
        },
        "classes": list(classes),
        "runs": [_run_record(r, cfg.emit_selections) for r in results],
        "aggregates": [
            {
                "condition": a.condition.tag,
                "runs": a.runs,
                "single_run": a.single_run,
                "macro_f1": {"mean": a.macro_f1_mean, "std": a.macro_f1_std},
                "overall_accuracy": {
                    "mean": a.overall_accuracy_mean,
                    "std": a.overall_accuracy_std,
                },
                "macro_recall": {"mean": a.macro_recall_mean, "std": a.macro_recall_std},
                "per_class_f1": {
                    cls: {
                        "mean": float(a.per_class_f1_mean[i]),
                        "std": float(a.per_class_f1_std[i]),
                    }
                    for i, cls in enumerate(classes)
                },
                "mean_confusion_normalized": [
                    [float(v) for v in row] for row in a.mean_confusion_normalized
                ],
            }
            for a in aggs.conditions
        ],
    }


def write_sweep_outputs(
    out_dir: str | Path,
    cfg: ExperimentConfig,
    results: Sequence[RunResult],
    classes: Sequence[str],
) -> list[Path]:
    """Write sweep.json, runs.csv, learning_curve.csv and per-condition
    normalized mean confusion CSVs. Returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    aggs = aggregate(results)
    doc = sweep_report_doc(cfg, results, classes, aggs)
    report = out / "sweep.json"
    report.write_text(json.dumps(doc, indent=2) + "\n")
    written.append(report)

    runs_csv = out / "runs.csv"
    with runs_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["condition", "seed", "macro_f1", "overall_accuracy", "macro_recall",
             "macro_precision", "fit_status", "fit_iterations"]
            + [f"f1_{c}" for c in classes]
        )
        for r in results:
            writer.writerow(
                [r.condition.tag, r.seed, repr(r.summary.macro_f1),
                 repr(r.summary.overall_accuracy), repr(r.summary.macro_recall),
                 repr(r.summary.macro_precision), r.fit_status, r.fit_iterations]
                + [repr(float(v)) for v in r.class_metrics.f1]
            )
    written.append(runs_csv)

    budget_rows = [
        (a.condition.b, a.macro_f1_mean, a.macro_f1_std)
        for a in aggs.conditions
        if isinstance(a.condition, Budget)
    ]
    if budget_rows:
        curve = out / "learning_curve.csv"
        with curve.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["budget", "mean_macro_f1", "std_macro_f1"])
            for b, mean, std in sorted(budget_rows):
                writer.writerow([b, repr(mean), repr(std)])
        written.append(curve)

    for a in aggs.conditions:
        path = out / f"confusion_{a.condition.tag}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true_class"] + list(classes))
            for i, cls in enumerate(classes):
                writer.writerow([cls] + [repr(float(v)) for v in a.mean_confusion_normalized[i]])
        written.append(path)
    return written


def load_sweep_report(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != "probebench.sweep/1":
        raise FormatError(f"{path}: not a probebench sweep report")
    return doc


def pick_report_condition(doc: dict, requested: str | None = None) -> dict:
    """Aggregate block to build the comparison table from.

    Defaults, in order: a fractional condition, `full`, the largest budget.
    """
    aggs = doc["aggregates"]
    if requested is not None:
        for a in aggs:
            if a["condition"] == requested:
                return a
        raise ConsistencyError(f"condition {requested!r} not present in the report")
    for a in aggs:
        if a["condition"].startswith("fraction"):
            return a
    for a in aggs:
        if a["condition"] == "full":
            return a
    budgets = [a for a in aggs if a["condition"].startswith("budget_")]
    if budgets:
        return max(budgets, key=lambda a: int(a["condition"].split("_")[1]))
    return aggs[0]


def write_comparison_report(
    out_dir: str | Path,
    doc: dict,
    baseline: BaselineReference,
    condition: str | None = None,
) -> list[Path]:
    """Per-class table (ours mean +/- std, baseline, delta, outperform flag)
    with a macro summary row, plus delta-F1 bar data."""
    classes = doc["classes"]
    if tuple(classes) != baseline.classes:
        ours_only = [c for c in classes if c not in baseline.classes]
        base_only = [c for c in baseline.classes if c not in classes]
        raise ConsistencyError(
            f"catalog mismatch with baseline: ours-only {ours_only}, baseline-only {base_only}"
        )
    agg = pick_report_condition(doc, condition)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    table = out / "per_class_report.csv"
    macro_ours = agg["macro_f1"]["mean"]
    with table.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["class", "ours_f1_mean", "ours_f1_std", "baseline_f1", "delta_f1", "outperforms"]
        )
        for i, cls in enumerate(classes):
            ours = agg["per_class_f1"][cls]
            base = float(baseline.per_class_f1[i])
            delta = ours["mean"] - base
            writer.writerow(
                [cls, repr(ours["mean"]), repr(ours["std"]), repr(base), repr(delta),
                 int(delta > 0)]
            )
        writer.writerow(
            ["MACRO", repr(macro_ours), repr(agg["macro_f1"]["std"]),
             repr(baseline.macro_f1), repr(macro_ours - baseline.macro_f1),
             int(macro_ours - baseline.macro_f1 > 0)]
        )

    bars = out / "delta_f1.csv"
    with bars.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "delta_f1"])
        for i, cls in enumerate(classes):
            delta = agg["per_class_f1"][cls]["mean"] - float(baseline.per_class_f1[i])
            writer.writerow([cls, repr(delta)])
    return [table, bars]
