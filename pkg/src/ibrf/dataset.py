"""Binary-labelled datasets: containers, KEEL/CSV readers and stratified folds."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .rng import derive_rng

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Base class for problems with input data."""


class ParseError(DatasetError):
    pass


class CardinalityError(DatasetError):
    pass


class FeatureTypeError(DatasetError, TypeError):
    pass


class StratificationError(DatasetError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense real feature matrix with integer class codes.

    ``labels`` holds codes 0/1 indexing into ``label_names``. ``row_ids`` tracks
    the provenance of each row relative to the originally loaded data so that
    derived subsets can be audited; synthetic rows carry ``-1``.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    label_names: tuple[str, str] = ("0", "1")
    row_ids: np.ndarray | None = field(default=None)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(0, 0)
        if X.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {X.shape}")
        y = np.array(self.labels, dtype=np.int64, copy=True).ravel()
        if X.shape[0] != y.shape[0]:
            raise DatasetError(
                f"features have {X.shape[0]} rows but labels have {y.shape[0]} entries"
            )
        if y.size and not np.isin(y, (0, 1)).all():
            raise DatasetError("labels must be class codes 0 or 1")
        if not np.isfinite(X).all():
            raise DatasetError("features contain missing or non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DatasetError(
                f"{len(names)} feature names given for {X.shape[1]} feature columns"
            )
        label_names = tuple(str(n) for n in self.label_names)
        if len(label_names) != 2 or label_names[0] == label_names[1]:
            raise DatasetError(f"need two distinct label names, got {label_names}")
        if self.row_ids is None:
            ids = np.arange(X.shape[0], dtype=np.int64)
        else:
            ids = np.array(self.row_ids, dtype=np.int64, copy=True).ravel()
            if ids.shape[0] != X.shape[0]:
                raise DatasetError("row_ids length must match the number of rows")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "label_names", label_names)
        object.__setattr__(self, "row_ids", _frozen(ids))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n_samples

    def counts(self) -> np.ndarray:
        """Per-code class counts, always length 2."""
        return np.bincount(self.labels, minlength=2)

    def subset(self, indices) -> "Dataset":
        """Rows at ``indices`` (duplicates allowed), provenance preserved."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            self.feature_names,
            self.label_names,
            self.row_ids[idx],
        )

    def append(self, features: np.ndarray, labels: np.ndarray) -> "Dataset":
        """New dataset with synthetic rows appended (row id -1)."""
        features = np.asarray(features, dtype=np.float64).reshape(-1, self.n_features)
        labels = np.asarray(labels, dtype=np.int64).ravel()
        return Dataset(
            np.vstack([self.features, features]),
            np.concatenate([self.labels, labels]),
            self.feature_names,
            self.label_names,
            np.concatenate([self.row_ids, np.full(len(labels), -1, dtype=np.int64)]),
        )

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.feature_names, self.label_names, self.row_ids)

    @classmethod
    def from_labels(cls, features, labels: Sequence, feature_names=()) -> "Dataset":
        """Build from arbitrary label values; codes follow sorted label names."""
        str_labels = [str(v) for v in labels]
        names = sorted(set(str_labels))
        if len(names) != 2:
            raise CardinalityError(
                f"expected exactly 2 classes, found {len(names)}: {names[:10]}"
            )
        code = {n: i for i, n in enumerate(names)}
        y = np.array([code[v] for v in str_labels], dtype=np.int64)
        return cls(features, y, tuple(feature_names), (names[0], names[1]))


@dataclass(frozen=True)
class ClassProfile:
    minority_label: int
    majority_label: int
    n_minority: int
    n_majority: int

    @property
    def imbalance_ratio(self) -> float:
        return self.n_majority / self.n_minority


@dataclass(frozen=True)
class FoldSplit:
    train_indices: np.ndarray
    test_indices: np.ndarray
    fold_id: int


def profile(dataset: Dataset) -> ClassProfile:
    """Identify minority and majority classes.

    On a tie the class whose name sorts first is the minority.
    """
    counts = dataset.counts()
    if (counts == 0).any():
        raise CardinalityError("profile needs both classes present")
    names = dataset.label_names
    order = sorted((0, 1), key=lambda c: (counts[c], names[c]))
    minority, majority = order
    return ClassProfile(minority, majority, int(counts[minority]), int(counts[majority]))


def stratified_kfold(dataset: Dataset, k: int, seed: int) -> list[FoldSplit]:
    """Per-class seeded shuffle, then round-robin dealing into ``k`` folds.

    The dealing position carries over from one class to the next so fold sizes
    differ by at most one.
    """
    if k < 2:
        raise StratificationError(f"need at least 2 folds, got {k}")
    counts = dataset.counts()
    for code in (0, 1):
        if counts[code] < k:
            raise StratificationError(
                f"class {dataset.label_names[code]!r} has {counts[code]} samples, "
                f"fewer than the {k} folds requested"
            )
    rng = derive_rng(seed, "stratified_kfold")
    fold_of = np.empty(dataset.n_samples, dtype=np.int64)
    position = 0
    # minority first so its spread is fixed independent of the majority size
    prof = profile(dataset)
    for code in (prof.minority_label, prof.majority_label):
        members = np.flatnonzero(dataset.labels == code)
        members = members[rng.permutation(len(members))]
        fold_of[members] = (position + np.arange(len(members))) % k
        position = (position + len(members)) % k
    folds = []
    for f in range(k):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        folds.append(FoldSplit(_frozen(train), _frozen(test), f))
    return folds


# --------------------------------------------------------------------------
# File formats
# --------------------------------------------------------------------------

def _parse_float(cell: str, where: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise FeatureTypeError(
            f"{where}: non-numeric feature value {cell!r} (categorical features are not supported)"
        ) from None
    if not math.isfinite(value):
        raise FeatureTypeError(f"{where}: non-finite feature value {cell!r}")
    return value


def load_keel(path) -> Dataset:
    """Read a KEEL ``.dat`` file. The last column is the class."""
    path = Path(path)
    attributes: list[str] = []
    rows: list[list[str]] = []
    row_lines: list[int] = []
    seen_relation = False
    in_data = False
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            if in_data:
                rows.append([c.strip() for c in line.split(",")])
                row_lines.append(lineno)
                continue
            if not line.startswith("@"):
                raise ParseError(f"{path}:{lineno}: expected a header line starting with '@'")
            keyword = line.split(None, 1)[0].lower()
            if keyword == "@relation":
                seen_relation = True
            elif keyword == "@attribute":
                parts = line.split(None, 2)
                if len(parts) < 3:
                    raise ParseError(f"{path}:{lineno}: malformed @attribute line")
                attributes.append(parts[1])
            elif keyword in ("@inputs", "@outputs", "@input", "@output"):
                pass
            elif keyword == "@data":
                if not seen_relation:
                    raise ParseError(f"{path}:{lineno}: @data before @relation")
                if not attributes:
                    raise ParseError(f"{path}:{lineno}: @data before any @attribute")
                in_data = True
            else:
                raise ParseError(f"{path}:{lineno}: unknown header keyword {keyword!r}")
    if not in_data:
        raise ParseError(f"{path}: missing @data section")
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(attributes)
    if width < 2:
        raise ParseError(f"{path}: need at least one feature attribute plus the class")
    X = np.empty((len(rows), width - 1))
    labels = []
    for i, (cells, lineno) in enumerate(zip(rows, row_lines)):
        if len(cells) != width:
            raise ParseError(
                f"{path}:{lineno}: expected {width} fields, found {len(cells)}"
            )
        for j, cell in enumerate(cells[:-1]):
            X[i, j] = _parse_float(cell, f"{path}:{lineno}")
        labels.append(cells[-1])
    return Dataset.from_labels(X, labels, attributes[:-1])


def load_csv(path, label_column: str | int = -1) -> Dataset:
    """Read a headed CSV; ``label_column`` is a column name or position."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required") from None
        body = [(reader.line_num, row) for row in reader if row]
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise ParseError(
                f"{path}: label column {label_column!r} not found; available columns: {header}"
            )
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)
        if not -len(header) <= label_idx < len(header):
            raise ParseError(
                f"{path}: label column index {label_idx} out of range for {len(header)} columns"
            )
        label_idx %= len(header)
    if not body:
        raise ParseError(f"{path}: no data rows")
    feature_idx = [j for j in range(len(header)) if j != label_idx]
    X = np.empty((len(body), len(feature_idx)))
    labels = []
    for i, (lineno, row) in enumerate(body):
        if len(row) != len(header):
            raise ParseError(
                f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}"
            )
        for out_j, j in enumerate(feature_idx):
            cell = row[j].strip()
            if cell == "":
                raise DatasetError(f"{path}: row {lineno} has an empty cell in column {header[j]!r}")
            X[i, out_j] = _parse_float(cell, f"{path}: row {lineno}")
        label = row[label_idx].strip()
        if label == "":
            raise DatasetError(f"{path}: row {lineno} has an empty label")
        labels.append(label)
    return Dataset.from_labels(X, labels, [header[j] for j in feature_idx])


def write_csv(dataset: Dataset, path, label_column: str = "class") -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*dataset.feature_names, label_column])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([*(repr(float(v)) for v in x), dataset.label_names[y]])


def load(path, fmt: str | None = None, label_column: str | int = -1) -> Dataset:
    """Dispatch on ``fmt`` (``keel``/``csv``) or on the file suffix."""
    if fmt is None:
        fmt = "keel" if Path(path).suffix.lower() == ".dat" else "csv"
    if fmt == "keel":
        return load_keel(path)
    if fmt == "csv":
        return load_csv(path, label_column)
    raise ValueError(f"unknown dataset format {fmt!r}")
