"""Stratified cross-validation benchmark over datasets and resampling methods.

Resampling only ever sees training folds. Each (dataset, method) cell is
deterministic given the master seed, so cells can run in any order or in
parallel without changing the report.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ensemble
from .dataset import Dataset, DatasetError, load, profile, stratified_kfold
from .metrics import METRIC_NAMES, all_metrics, confusion, roc_auc
from .rng import derive_int, derive_rng
from .sampling import SamplerConfig, neighborhood_clean, smote, undersample_to_count

logger = logging.getLogger(__name__)

METHODS = ("no_sampling_rf", "smote_rf", "rus_rf", "nc_rf", "brf", "ibrf")
DISPLAY_NAMES = {
    "no_sampling_rf": "NO SAMPLING",
    "smote_rf": "SMOTE",
    "rus_rf": "RUS",
    "nc_rf": "NC",
    "brf": "BRF",
    "ibrf": "iBRF",
}
METRIC_HEADERS = {
    "mcc": "MCC",
    "gmean": "G-MEAN",
    "roc_auc": "ROC",
    "sensitivity": "Sensitivity",
    "specificity": "Specificity",
    "precision": "Precision",
    "accuracy": "Accuracy",
    "f1": "F1-Score",
}
MEAN_ROW_ID = "MEAN"
REPORT_FORMATS = ("markdown", "csv", "json")


@dataclass(frozen=True)
class DataSource:
    path: str
    format: str | None = None
    label_column: str | int = -1

    @property
    def dataset_id(self) -> str:
        return Path(self.path).stem


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DataSource, ...] = ()
    methods: tuple[str, ...] = METHODS
    folds: int = 5
    seed: int = 0
    n_trees: int = 100
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    scale: bool = False
    output_format: str = "markdown"
    workers: int = 1
    mean_rows: bool = True
    max_features: int | None = None

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if not self.methods:
            raise ValueError("select at least one method")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if self.output_format not in REPORT_FORMATS:
            raise ValueError(f"unknown report format {self.output_format!r}")


@dataclass
class ReportRow:
    """Metric means (in percent) for one dataset and method.

    ``per_fold`` holds the values that were averaged: one per fold for a
    dataset row, one per dataset for a cross-dataset mean row.
    """

    dataset: str
    method: str
    means: dict[str, float] = field(default_factory=dict)
    per_fold: dict[str, list[float]] = field(default_factory=dict)
    traces: list[dict] = field(default_factory=list)
    error: str | None = None
    error_kind: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "method": self.method,
            "means": dict(self.means),
            "per_fold": {k: list(v) for k, v in self.per_fold.items()},
            "traces": list(self.traces),
            "error": self.error,
            "error_kind": self.error_kind,
        }


class CellError(RuntimeError):
    def __init__(self, fold_id: int, cause: Exception):
        super().__init__(f"fold {fold_id}: {cause}")
        self.fold_id = fold_id


def _mean(values) -> float:
    return math.fsum(values) / len(values)


def _minmax_fit(X: np.ndarray):
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span[span == 0] = 1.0
    return lo, span


def _summarise_traces(traces, smote_k: int) -> dict:
    traces = [t for t in traces if t is not None]
    if not traces:
        return {}
    return {
        "trees": len(traces),
        "nc_removed_mean": _mean([len(t.removed_by_nc) for t in traces]),
        "nc_removed_fraction_mean": _mean(
            [len(t.removed_by_nc) / (t.input_minority + t.input_majority) for t in traces]),
        "rus_removed_mean": _mean([len(t.removed_by_rus) for t in traces]),
        "synthetic_mean": _mean([t.synthetic_count for t in traces]),
        "final_per_class_mean": _mean([t.final_minority for t in traces]),
        "nc_skipped_trees": sum(t.nc_skipped for t in traces),
        "smote_fallback_trees": sum(t.smote_k_used < smote_k for t in traces),
    }


def _run_fold(dataset: Dataset, split, method: str, config: ExperimentConfig,
              minority: int, observer=None) -> tuple[dict, dict]:
    train = dataset.subset(split.train_indices)
    test = dataset.subset(split.test_indices)
    if config.scale:
        if observer is not None:
            observer("scale", train)
        lo, span = _minmax_fit(train.features)
        train = train.with_features((train.features - lo) / span)
        test = test.with_features((test.features - lo) / span)

    trace: dict = {"fold": split.fold_id, "n_train": train.n_samples, "n_test": test.n_samples}
    rng = derive_rng(config.seed, "fold-sampler", split.fold_id)
    counts = train.counts()
    if method in ("smote_rf", "rus_rf", "nc_rf") and observer is not None:
        observer("sampler", train)
    if method == "smote_rf":
        before = train.n_samples
        train = smote(train, config.sampler.smote_k, int(counts[1 - minority]), rng,
                      minority=minority)
        trace["synthetic"] = train.n_samples - before
    elif method == "rus_rf":
        before = train.n_samples
        train = undersample_to_count(train, int(counts[minority]), rng, minority=minority)
        trace["rus_removed"] = before - train.n_samples
    elif method == "nc_rf":
        train, removed = neighborhood_clean(train, config.sampler.nc_k, minority=minority)
        trace["nc_removed"] = len(removed)

    forest_method = method if method in ("brf", "ibrf") else "rf_plain"
    forest_config = ensemble.EnsembleConfig(
        n_trees=config.n_trees,
        method=forest_method,
        sampler=config.sampler,
        seed=derive_int(config.seed, "forest", split.fold_id),
        max_features=config.max_features,
    )
    model = ensemble.fit(train, forest_config, minority=minority, observer=observer)
    trace.update(_summarise_traces(model.traces, config.sampler.smote_k))

    if observer is not None:
        observer("evaluate", test)
    p_min = ensemble.predict_proba(model, test.features)[:, minority]
    pred = np.where(p_min >= 0.5, minority, 1 - minority)
    cm = confusion(test.labels, pred, positive=minority)
    metrics = all_metrics(cm, roc_auc(test.labels, p_min, positive=minority))
    trace["confusion"] = {"tp": cm.tp, "fn": cm.fn, "fp": cm.fp, "tn": cm.tn}
    return metrics, trace


def run_cv(dataset: Dataset, method: str, config: ExperimentConfig,
           dataset_id: str = "dataset", observer=None) -> ReportRow:
    """Cross-validate one method on one dataset.

    Raises ``StratificationError`` when the folds cannot be formed and
    ``CellError`` (carrying the fold index) for failures inside a fold.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    folds = stratified_kfold(dataset, config.folds, config.seed)
    minority = profile(dataset).minority_label
    per_fold: dict[str, list[float]] = {m: [] for m in METRIC_NAMES}
    traces = []
    for split in folds:
        try:
            metrics, trace = _run_fold(dataset, split, method, config, minority, observer)
        except Exception as exc:
            raise CellError(split.fold_id, exc) from exc
        for name in METRIC_NAMES:
            per_fold[name].append(100.0 * metrics[name])
        traces.append(trace)
    means = {name: _mean(per_fold[name]) for name in METRIC_NAMES}
    return ReportRow(dataset_id, method, means, per_fold, traces)


def _run_cell(args) -> ReportRow:
    dataset_id, dataset, method, config = args
    try:
        return run_cv(dataset, method, config, dataset_id)
    except Exception as exc:
        logger.error("%s / %s failed: %s", dataset_id, method, exc)
        kind = "data" if isinstance(exc, DatasetError) else "run"
        return ReportRow(dataset_id, method, error=str(exc), error_kind=kind)


def mean_rows(rows: list[ReportRow], methods) -> list[ReportRow]:
    out = []
    for method in methods:
        good = [r for r in rows if r.method == method and r.ok]
        if not good:
            continue
        per = {name: [r.means[name] for r in good] for name in METRIC_NAMES}
        out.append(ReportRow(MEAN_ROW_ID, method,
                             {name: _mean(v) for name, v in per.items()}, per))
    return out


def run_benchmark(config: ExperimentConfig, datasets=None) -> list[ReportRow]:
    """Run every dataset x method cell and append per-method mean rows.

    ``datasets`` optionally supplies in-memory ``(id, Dataset)`` pairs in place
    of ``config.datasets``. Failed cells come back as rows with ``error`` set.
    """
    cells = []
    failed_rows: dict[int, list[ReportRow]] = {}
    if datasets is None:
        if not config.datasets:
            raise ValueError("no datasets given")
        datasets = []
        for i, src in enumerate(config.datasets):
            try:
                datasets.append((src.dataset_id, load(src.path, src.format, src.label_column)))
            except (DatasetError, OSError) as exc:
                logger.error("could not load %s: %s", src.path, exc)
                failed_rows[i] = [ReportRow(src.dataset_id, m, error=str(exc), error_kind="data")
                                  for m in config.methods]
                datasets.append((src.dataset_id, None))
    elif not datasets:
        raise ValueError("no datasets given")

    for dataset_id, data in datasets:
        if data is None:
            continue
        for method in config.methods:
            cells.append((dataset_id, data, method, config))

    if config.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]

    rows: list[ReportRow] = []
    it = iter(results)
    for i, (dataset_id, data) in enumerate(datasets):
        if data is None:
            rows.extend(failed_rows[i])
        else:
            rows.extend(next(it) for _ in config.methods)
    if config.mean_rows:
        rows.extend(mean_rows(rows, config.methods))
    return rows


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.3f}"


def emit_report(rows: list[ReportRow], fmt: str = "markdown") -> str:
    """Render rows as a markdown table, CSV, or detailed JSON.

    Markdown rounds to three decimals; CSV keeps full precision so parsing it
    back recovers the means exactly.
    """
    if not rows:
        raise ValueError("nothing to report")
    headers = [METRIC_HEADERS[m] for m in METRIC_NAMES]
    if fmt == "markdown":
        lines = ["| Dataset | Methods | " + " | ".join(headers) + " |",
                 "|---|---|" + "---:|" * len(headers)]
        for r in rows:
            name = DISPLAY_NAMES.get(r.method, r.method)
            if r.ok:
                cells = [_fmt(r.means[m]) for m in METRIC_NAMES]
            else:
                cells = [f"failed ({r.error_kind}): {r.error}"] + [""] * (len(headers) - 1)
            lines.append(f"| {r.dataset} | {name} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["dataset", "method", *headers, "error"])
        for r in rows:
            if r.ok:
                writer.writerow([r.dataset, r.method, *(repr(r.means[m]) for m in METRIC_NAMES), ""])
            else:
                writer.writerow([r.dataset, r.method, *([""] * len(headers)), r.error])
        return buf.getvalue()
    if fmt == "json":
        doc = {"metrics": [METRIC_HEADERS[m] for m in METRIC_NAMES],
               "units": "percent",
               "rows": [r.to_dict() for r in rows]}
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown report format {fmt!r}; choose from {REPORT_FORMATS}")


def parse_csv_report(text: str) -> list[dict]:
    """Read back an ``emit_report(..., 'csv')`` document."""
    out = []
    reader = csv.DictReader(io.StringIO(text))
    for rec in reader:
        means = {m: float(rec[METRIC_HEADERS[m]]) for m in METRIC_NAMES
                 if rec[METRIC_HEADERS[m]] != ""}
        out.append({"dataset": rec["dataset"], "method": rec["method"], "means": means,
                    "error": rec["error"] or None})
    return out


# --------------------------------------------------------------------------
# Synthetic data
# --------------------------------------------------------------------------

def generate_synthetic(n_minority: int, n_majority: int, overlap: float, dims: int,
                       seed: int) -> Dataset:
    """Two unit-covariance Gaussian clouds whose means lie ``1 / overlap`` apart.

    The offset is along the diagonal direction; ``overlap = 0`` places the
    clouds effectively infinitely far apart. Labels are ``positive`` (minority)
    and ``negative`` (majority).
    """
    if n_minority < 1 or n_majority < 1:
        raise ValueError("class counts must be at least 1")
    if overlap < 0:
        raise ValueError("overlap must be non-negative")
    if dims < 1:
        raise ValueError("dims must be at least 1")
    rng = derive_rng(seed, "synthetic")
    separation = 1.0 / overlap if overlap > 0 else 1e6
    direction = np.ones(dims) / math.sqrt(dims)
    X_maj = rng.standard_normal((n_majority, dims))
    X_min = rng.standard_normal((n_minority, dims)) + separation * direction
    X = np.vstack([X_min, X_maj])
    # label codes follow sorted names: negative=0, positive=1
    y = np.r_[np.ones(n_minority, dtype=np.int64), np.zeros(n_majority, dtype=np.int64)]
    order = rng.permutation(len(y))
    return Dataset(X[order], y[order], tuple(f"x{j}" for j in range(dims)),
                   ("negative", "positive"))
