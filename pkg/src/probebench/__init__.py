"""Label-efficiency benchmarking for linear probes on frozen embeddings.

Trains class-balanced multinomial logistic regression probes with L-BFGS
on frozen embedding datasets, sweeps absolute label budgets and fractional
splits across seeded runs, and aggregates macro-averaged test metrics with
per-class baseline comparisons.
"""

from importlib import resources

from .errors import (
    ConsistencyError,
    DegenerateInputError,
    FormatError,
    NumericalError,
    ParseError,
    ProbeBenchError,
    ShapeError,
    TruncatedFileError,
)
from .lbfgs import OptimizeOutcome, OptimizerConfig, minimize
from .metrics import (
    BaselineReference,
    ClassMetrics,
    ConfusionMatrix,
    MacroSummary,
    confusion,
    delta_f1,
    evaluate,
    per_class_prf,
    summarize,
)
from .probe import ClassWeights, FitInfo, ModelParams, ProbeConfig, fit, predict, predict_proba
from .runner import (
    AggregateResult,
    ExperimentConfig,
    RunResult,
    SweepError,
    aggregate,
    run_single,
    run_sweep,
)
from .sampling import (
    Budget,
    Condition,
    Fraction,
    Full,
    SampleSelection,
    budget_sample,
    stratified_split,
)
from .store import (
    EmbeddingDataset,
    Manifest,
    build_manifest,
    file_checksum,
    load_binary,
    load_csv,
    normalize_rows,
    save_binary,
    save_csv,
    verify_manifest,
)

__version__ = "0.1.0"

PAPER_BUDGETS = (1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144)


def convnext_baseline_path() -> str:
    """Path of the shipped ConvNeXt/AQUA20 baseline reference JSON."""
    return str(resources.files("probebench").joinpath("data/convnext_aqua20.json"))
