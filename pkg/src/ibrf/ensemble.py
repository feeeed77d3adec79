"""Bagged tree ensembles: plain RF, Balanced RF, and iBRF.

The three methods share one pipeline per tree: draw a bootstrap subset that
keeps every minority row, resample it according to the method, fit a tree.
Predictions average the trees' leaf class fractions.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import Dataset, profile
from .rng import derive_rng
from .sampling import SamplerConfig, SamplingTrace, hybrid_resample, undersample_to_count
from .tree import DecisionTree, fit_tree

METHODS = ("ibrf", "brf", "rf_plain")
MODEL_FORMAT_VERSION = 1


class EnsembleFitError(RuntimeError):
    def __init__(self, tree_index: int, cause: Exception):
        super().__init__(f"tree {tree_index}: {cause}")
        self.tree_index = tree_index


@dataclass(frozen=True)
class EnsembleConfig:
    n_trees: int = 100
    method: str = "ibrf"
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    seed: int = 0
    max_features: int | None = None

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "EnsembleConfig":
        doc = dict(doc)
        doc["sampler"] = SamplerConfig(**doc.get("sampler", {}))
        return cls(**doc)


@dataclass(eq=False)
class ForestModel:
    trees: list[DecisionTree]
    minority_label: int
    majority_label: int
    config: EnsembleConfig
    label_names: tuple[str, str] = ("0", "1")
    traces: list[SamplingTrace | None] = field(default_factory=list, repr=False)

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    def predict_proba(self, X) -> np.ndarray:
        return predict_proba(self, X)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return predict(self, X, threshold)

    def to_dict(self) -> dict:
        return {
            "format": "ibrf-forest",
            "version": MODEL_FORMAT_VERSION,
            "config": self.config.to_dict(),
            "label_names": list(self.label_names),
            "minority_label": self.minority_label,
            "majority_label": self.majority_label,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestModel":
        if doc.get("format") != "ibrf-forest":
            raise ValueError("not an ibrf forest document")
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')!r}")
        return cls(
            trees=[DecisionTree.from_dict(t) for t in doc["trees"]],
            minority_label=int(doc["minority_label"]),
            majority_label=int(doc["majority_label"]),
            config=EnsembleConfig.from_dict(doc["config"]),
            label_names=tuple(doc["label_names"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "ForestModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def bootstrap_indices(labels, minority: int, rng: np.random.Generator) -> np.ndarray:
    """Every minority position once plus ``n_majority`` majority draws with replacement.

    Returned sorted, so the subset keeps the training fold's row order.
    """
    labels = np.asarray(labels)
    minority_idx = np.flatnonzero(labels == minority)
    majority_idx = np.flatnonzero(labels != minority)
    draws = majority_idx[rng.integers(0, len(majority_idx), size=len(majority_idx))]
    return np.sort(np.concatenate([minority_idx, draws]))


def bootstrap_subset(train: Dataset, rng: np.random.Generator,
                     minority: int | None = None) -> Dataset:
    counts = train.counts()
    if (counts == 0).any():
        raise ValueError("bootstrap subsets need both classes in the training data")
    if minority is None:
        minority = profile(train).minority_label
    return train.subset(bootstrap_indices(train.labels, minority, rng))


def _fit_one(train: Dataset, config: EnsembleConfig, minority: int, t: int, observer):
    rng = derive_rng(config.seed, "tree", t)
    subset = bootstrap_subset(train, rng, minority)
    if observer is not None:
        observer("bootstrap", subset)
    trace = None
    if config.method == "ibrf":
        subset, trace = hybrid_resample(subset, config.sampler, rng, minority=minority,
                                        observer=observer)
    elif config.method == "brf":
        n_min = int(subset.counts()[minority])
        subset = undersample_to_count(subset, n_min, rng, minority=minority)
    if observer is not None:
        observer("fit_tree", subset)
    tree = fit_tree(subset, config.max_features, rng, training_seed=t)
    return tree, trace


def fit(train: Dataset, config: EnsembleConfig | None = None, n_jobs: int = 1,
        observer=None, minority: int | None = None) -> ForestModel:
    """Train ``config.n_trees`` trees.

    Tree ``t`` draws all of its randomness from a stream derived from
    ``(config.seed, t)``, so the model is identical for every ``n_jobs``.
    ``observer(stage, dataset)``, if given, sees the data entering each
    sampling stage and each tree fit. ``minority`` overrides the class code
    treated as minority (by default the rarer class in ``train``).
    """
    config = config or EnsembleConfig()
    if (train.counts() == 0).any():
        raise ValueError("training data must contain both classes")
    if minority is None:
        minority = profile(train).minority_label

    def run(t):
        try:
            return _fit_one(train, config, minority, t, observer)
        except Exception as exc:
            raise EnsembleFitError(t, exc) from exc

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, range(config.n_trees)))
    else:
        results = [run(t) for t in range(config.n_trees)]
    return ForestModel(
        trees=[tree for tree, _ in results],
        minority_label=int(minority),
        majority_label=1 - int(minority),
        config=config,
        label_names=train.label_names,
        traces=[trace for _, trace in results],
    )


def predict_proba(model: ForestModel, X) -> np.ndarray:
    """Mean of the trees' class probabilities; columns follow class codes."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    total = np.zeros((X.shape[0], 2))
    for tree in model.trees:
        total += tree.predict_proba(X)
    return total / len(model.trees)


def predict(model: ForestModel, X, threshold: float = 0.5) -> np.ndarray:
    """Class codes; the minority wins when its probability reaches ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    p_min = predict_proba(model, X)[:, model.minority_label]
    return np.where(p_min >= threshold, model.minority_label, model.majority_label)
