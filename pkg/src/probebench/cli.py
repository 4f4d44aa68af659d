"""Operator entry point.

Subcommands: validate, ingest-csv, train, sweep, report,
export-embeddings. Exit codes: 0 success, 1 validation failure, 2 usage
error, 3 runtime/numerical error. Every subcommand is deterministic for
identical inputs and flags; worker count (--jobs, or the PROBEBENCH_JOBS
environment variable when the flag is absent) never affects outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import reports, runner, store
from .errors import ProbeBenchError
from .metrics import BaselineReference
from .probe import ProbeConfig, fit
from .sampling import Budget, Condition, Fraction, Full, budget_sample

ROW_NORM_TOL = 1e-5


class UsageConflict(Exception):
    """Conflicting or incomplete flags, detected before any work starts."""


def _load_as(path: str, split_tag: str) -> store.EmbeddingDataset:
    """Load an EMB1 file and tag it with the role its flag implies
    (the container itself does not record splits)."""
    ds = store.load_binary(path)
    return store.EmbeddingDataset(ds.data, ds.labels, ds.classes, split_tag)


def _parse_seed_range(text: str) -> tuple[int, ...]:
    """`a..b` inclusive, or a single integer."""
    try:
        if ".." in text:
            lo_s, hi_s = text.split("..", 1)
            lo, hi = int(lo_s), int(hi_s)
            if hi < lo:
                raise UsageConflict(f"empty seed range {text!r}")
            return tuple(range(lo, hi + 1))
        return (int(text),)
    except ValueError:
        raise UsageConflict(f"bad seed range {text!r}") from None


def _parse_budgets(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageConflict(f"bad budget list {text!r}") from None


# ---------------------------------------------------------------- validate

def _describe(tag: str, ds: store.EmbeddingDataset) -> None:
    print(f"{tag}: n={ds.n} d={ds.dim} K={ds.n_classes} split_tag={ds.split_tag}")
    counts = ds.class_counts()
    print(f"{tag} class counts: " + " ".join(f"{c}={int(n)}" for c, n in zip(ds.classes, counts)))


def cmd_validate(args) -> int:
    failures: list[str] = []

    def check(name: str, ok: bool, detail: str = "") -> None:
        line = f"check {name}: " + ("ok" if ok else "FAIL")
        if detail:
            line += f" ({detail})"
        print(line)
        if not ok:
            failures.append(name)

    datasets = {}
    for tag, path in (("train", args.train), ("test", args.test)):
        try:
            datasets[tag] = _load_as(path, tag)
            check(f"file-format-{tag}", True)
        except ProbeBenchError as exc:
            check(f"file-format-{tag}", False, str(exc))
        except OSError as exc:
            check(f"file-format-{tag}", False, str(exc))

    for tag, ds in datasets.items():
        _describe(tag, ds)
        counts = ds.class_counts()
        check(f"class-nonempty-{tag}", bool((counts > 0).all()),
              "empty classes: " + ",".join(ds.classes[i] for i in np.flatnonzero(counts == 0)))
        norms = np.linalg.norm(ds.data, axis=1)
        if ds.n:
            worst = int(np.argmax(np.abs(norms - 1.0)))
            dev = float(abs(norms[worst] - 1.0))
            check(f"row-norm-{tag}", dev <= ROW_NORM_TOL,
                  f"worst row {worst}, |norm-1|={dev:.3e}")
        else:
            check(f"row-norm-{tag}", True)

    if len(datasets) == 2:
        same = datasets["train"].classes == datasets["test"].classes
        check("catalog-match", same,
              "" if same else f"train K={datasets['train'].n_classes} "
                              f"test K={datasets['test'].n_classes} or order differs")
        check("dim-match", datasets["train"].dim == datasets["test"].dim)

    if args.manifest:
        try:
            manifest = store.Manifest.from_json(Path(args.manifest).read_text())
            store.verify_manifest(manifest, Path(args.manifest).parent)
            check("manifest", True)
        except (ProbeBenchError, OSError) as exc:
            check("manifest", False, str(exc))

    if failures:
        print(f"RESULT: FAIL ({', '.join(failures)})")
        return 1
    print("RESULT: ok")
    return 0


# -------------------------------------------------------------- ingest-csv

def cmd_ingest_csv(args) -> int:
    ds = store.load_csv(args.csv)
    if args.normalize:
        ds = store.normalize_rows(ds)
    ds = store.EmbeddingDataset(ds.data, ds.labels, ds.classes, split_tag=args.split_tag)
    store.save_binary(ds, args.out)
    print(f"wrote {args.out}: n={ds.n} d={ds.dim} K={ds.n_classes}")
    if args.manifest:
        name = args.dataset_name or Path(args.csv).stem
        manifest = store.build_manifest(
            name, {args.split_tag: args.out}, base_dir=Path(args.manifest).parent
        )
        Path(args.manifest).write_text(manifest.to_json())
        print(f"wrote {args.manifest}")
    return 0


# ------------------------------------------------------------------- train

def cmd_train(args) -> int:
    ds = _load_as(args.train, "train")
    cfg = ProbeConfig(C=args.C, class_weighting=args.weighting, max_iterations=args.max_iter)
    selection = None
    if args.budget is not None:
        selection = budget_sample(ds, args.budget, args.seed)
        print(f"budget {args.budget}/class, seed {args.seed}: "
              f"{len(selection.selected)} training rows")
    params = fit(ds, selection, cfg)
    info = params.fit_info
    print(f"fit: status={info.status} iterations={info.iterations} "
          f"objective={info.final_objective:.6f} grad_inf={info.grad_inf_norm:.3e}")
    if args.save_model:
        Path(args.save_model).write_text(params.to_json(cfg))
        print(f"wrote {args.save_model}")
    return 0


# ------------------------------------------------------------------- sweep

def _load_sweep_config(path: str) -> dict:
    doc = json.loads(Path(path).read_text())
    allowed = {"budgets", "fraction", "full", "seeds", "C", "weighting",
               "max_iterations", "grad_tolerance", "emit_selections"}
    unknown = doc.keys() - allowed
    if unknown:
        raise UsageConflict(f"unknown config keys: {sorted(unknown)}")
    return doc


def cmd_sweep(args) -> int:
    filecfg = _load_sweep_config(args.config) if args.config else {}

    # inline flags win over the config file
    budgets = _parse_budgets(args.budgets) if args.budgets else filecfg.get("budgets", [])
    fraction = args.fraction if args.fraction is not None else filecfg.get("fraction")
    want_full = args.full or filecfg.get("full", False)
    if args.seeds:
        seeds = _parse_seed_range(args.seeds)
    elif "seeds" in filecfg:
        raw = filecfg["seeds"]
        seeds = _parse_seed_range(raw) if isinstance(raw, str) else tuple(int(s) for s in raw)
    else:
        seeds = tuple(range(100))

    conditions: list[Condition] = [Budget(int(b)) for b in budgets]
    if fraction is not None:
        conditions.append(Fraction(float(fraction)))
    if want_full:
        conditions.append(Full())
    if not conditions:
        raise UsageConflict("nothing to run: give --budgets, --fraction or --full")

    probe_cfg = ProbeConfig(
        C=args.C if args.C is not None else filecfg.get("C", 10.0),
        class_weighting=args.weighting or filecfg.get("weighting", "balanced"),
        max_iterations=args.max_iter or filecfg.get("max_iterations", 100),
        grad_tolerance=filecfg.get("grad_tolerance", 1e-4),
    )
    jobs = args.jobs if args.jobs is not None else int(os.environ.get("PROBEBENCH_JOBS", "1"))

    cfg = runner.ExperimentConfig(
        conditions=tuple(conditions),
        seeds=seeds,
        probe=probe_cfg,
        emit_selections=args.emit_selections or filecfg.get("emit_selections", False),
        parallelism=max(1, jobs),
    )
    train_ds = _load_as(args.train, "train")
    test_ds = _load_as(args.test, "test")
    results = runner.run_sweep(cfg, train_ds, test_ds)
    written = reports.write_sweep_outputs(args.out_dir, cfg, results, train_ds.classes)
    total = sum(r.duration_s for r in results)
    print(f"{len(results)} runs ({total:.1f}s fit+score time)", file=sys.stderr)
    for p in written:
        print(f"wrote {p}")
    return 0


# ------------------------------------------------------------------ report

def cmd_report(args) -> int:
    doc = reports.load_sweep_report(args.runs)
    baseline = BaselineReference.from_json(Path(args.baseline).read_text())
    written = reports.write_comparison_report(args.out_dir, doc, baseline, args.condition)
    for p in written:
        print(f"wrote {p}")
    return 0


# ----------------------------------------------------- export-embeddings

def cmd_export(args) -> int:
    ds = store.load_binary(args.data)
    store.save_csv(ds, args.out)
    print(f"wrote {args.out}: {ds.n} rows")
    return 0


# -------------------------------------------------------------- arg wiring

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probebench",
        description="Label-efficiency benchmarking for linear probes on frozen embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check dataset invariants and split consistency")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ingest-csv", help="convert the CSV interchange format to EMB1")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split-tag", default="unsplit", choices=store.SPLIT_TAGS)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--manifest", help="also write a manifest JSON here")
    p.add_argument("--dataset-name")
    p.set_defaults(func=cmd_ingest_csv)

    p = sub.add_parser("train", help="fit one probe and optionally save the model")
    p.add_argument("--train", required=True)
    p.add_argument("--C", type=float, default=10.0)
    p.add_argument("--weighting", default="balanced", choices=("uniform", "balanced"))
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--budget", type=int, help="per-class label budget (default: all rows)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run conditions x seeds and write reports")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--config", help="JSON experiment config; inline flags win")
    p.add_argument("--budgets", help="comma-separated per-class budgets")
    p.add_argument("--fraction", type=float, help="stratified train share, e.g. 0.8")
    p.add_argument("--full", action="store_true", help="single run on all training rows")
    p.add_argument("--seeds", help="inclusive range a..b (default 0..99)")
    p.add_argument("--C", type=float)
    p.add_argument("--weighting", choices=("uniform", "balanced"))
    p.add_argument("--max-iter", type=int)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, help="worker processes (env PROBEBENCH_JOBS)")
    p.add_argument("--emit-selections", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="compare sweep aggregates against a baseline")
    p.add_argument("--runs", required=True, help="sweep.json from a sweep run")
    p.add_argument("--baseline", required=True, help="baseline reference JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--condition", help="condition tag (default: fraction, full, largest budget)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export-embeddings", help="dump an EMB1 file to labeled CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageConflict as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ProbeBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
