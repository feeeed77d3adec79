"""Neighbourhood cleaning, random undersampling, SMOTE, and their hybrid.

All samplers treat the class that is rarer in their input as the minority
unless told otherwise, and return new ``Dataset`` objects. Removed-index lists
are positions in the sampler's input.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import Dataset, DatasetError, profile
from .neighbors import knn_graph

logger = logging.getLogger(__name__)


class SamplingError(DatasetError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    nc_k: int = 3
    rus_fraction: float = 0.20
    smote_k: int = 5

    def __post_init__(self):
        if self.nc_k < 1:
            raise ValueError(f"nc_k must be >= 1, got {self.nc_k}")
        if self.smote_k < 1:
            raise ValueError(f"smote_k must be >= 1, got {self.smote_k}")
        if not 0.0 <= self.rus_fraction < 1.0:
            raise ValueError(f"rus_fraction must lie in [0, 1), got {self.rus_fraction}")


@dataclass
class SamplingTrace:
    removed_by_nc: list[int] = field(default_factory=list)
    removed_by_rus: list[int] = field(default_factory=list)
    synthetic_count: int = 0
    final_minority: int = 0
    final_majority: int = 0
    input_minority: int = 0
    input_majority: int = 0
    nc_skipped: bool = False
    smote_k_used: int = 0
    smote_duplicated: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _minority_code(data: Dataset, minority: int | None) -> int:
    if minority is not None:
        return int(minority)
    return profile(data).minority_label


def _require_both_classes(data: Dataset, what: str) -> None:
    counts = data.counts()
    if (counts == 0).any():
        raise SamplingError(f"{what} needs both classes present, got counts {counts.tolist()}")


def neighborhood_clean(data: Dataset, k: int = 3, minority: int | None = None):
    """Remove noisy majority samples by a ``k``-NN vote.

    Every sample is classified by simple majority of its ``k`` nearest
    neighbours (itself excluded; a tied vote keeps the true label). Misclassified
    majority samples are removed, and so is every majority neighbour of a
    misclassified minority sample. Marks are taken against the input set in a
    single pass and applied together, so the result is order-independent.

    If either class has ``k`` or fewer members the vote is undefined and the
    input is returned unchanged (with a logged warning).

    Returns
    -------
    cleaned : Dataset
    removed : ndarray of int
        Sorted positions of removed rows in ``data``.
    """
    _require_both_classes(data, "neighborhood cleaning")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    minority = _minority_code(data, minority)
    if data.counts().min() <= k:
        logger.warning(
            "neighbourhood cleaning skipped: a class has <= %d samples (counts %s)",
            k, data.counts().tolist(),
        )
        return data, np.empty(0, dtype=np.int64)
    y = data.labels
    neigh = knn_graph(data.features, k)
    disagree = (y[neigh] != y[:, None]).sum(axis=1)
    misclassified = 2 * disagree > k
    marked = np.zeros(len(y), dtype=bool)
    is_minority = y == minority
    marked |= misclassified & ~is_minority
    flagged = neigh[misclassified & is_minority].ravel()
    marked[flagged[y[flagged] != minority]] = True
    removed = np.flatnonzero(marked)
    return data.subset(np.flatnonzero(~marked)), removed


def rus_count(fraction: float, n_majority: int) -> int:
    """floor(fraction * n_majority), immune to 0.29*100 = 28.999... rounding."""
    return int(math.floor(fraction * n_majority + 1e-9))


def random_undersample(data: Dataset, fraction: float, rng: np.random.Generator,
                       minority: int | None = None):
    """Drop ``floor(fraction * n_majority)`` majority rows uniformly at random.

    Returns the reduced dataset and the sorted positions removed.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must lie in [0, 1), got {fraction}")
    minority = _minority_code(data, minority)
    majority_idx = np.flatnonzero(data.labels != minority)
    n_remove = rus_count(fraction, len(majority_idx))
    if len(majority_idx) - n_remove < 1:
        raise SamplingError("random undersampling would leave no majority samples")
    if n_remove == 0:
        return data, np.empty(0, dtype=np.int64)
    removed = np.sort(rng.choice(majority_idx, size=n_remove, replace=False))
    keep = np.ones(data.n_samples, dtype=bool)
    keep[removed] = False
    return data.subset(np.flatnonzero(keep)), removed


def undersample_to_count(data: Dataset, target_majority: int, rng: np.random.Generator,
                         minority: int | None = None) -> Dataset:
    """Keep exactly ``target_majority`` majority rows, chosen without replacement."""
    minority = _minority_code(data, minority)
    minority_idx = np.flatnonzero(data.labels == minority)
    majority_idx = np.flatnonzero(data.labels != minority)
    if target_majority > len(majority_idx):
        raise SamplingError(
            f"cannot keep {target_majority} of {len(majority_idx)} majority samples"
        )
    kept = rng.choice(majority_idx, size=target_majority, replace=False)
    return data.subset(np.sort(np.concatenate([minority_idx, kept])))


def smote_k_effective(n_minority: int, k: int) -> int:
    """Neighbour count SMOTE can actually use; 0 means fall back to duplication."""
    return max(0, min(k, n_minority - 1))


def smote(data: Dataset, k: int, target_minority_count: int, rng,
          minority: int | None = None) -> Dataset:
    """Append synthetic minority rows until the minority count reaches the target.

    Seeds cycle through the minority rows in order. Each synthetic row is
    ``x + g * (x_nn - x)`` with ``x_nn`` drawn uniformly from the seed's
    ``k`` nearest minority neighbours (computed once on the original minority
    rows) and ``g ~ U[0, 1)``. With fewer than ``k + 1`` minority rows, ``k``
    shrinks to ``n_minority - 1``; a lone minority row is duplicated.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    minority = _minority_code(data, minority)
    minority_idx = np.flatnonzero(data.labels == minority)
    n_min = len(minority_idx)
    if n_min == 0:
        raise SamplingError("SMOTE needs at least one minority sample")
    if target_minority_count < n_min:
        raise ValueError(
            f"target {target_minority_count} is below the current minority count {n_min}"
        )
    n_new = target_minority_count - n_min
    if n_new == 0:
        return data
    X_min = data.features[minority_idx]
    seeds = np.arange(n_new) % n_min
    k_eff = smote_k_effective(n_min, k)
    if k_eff == 0:
        synthetic = X_min[seeds]
    else:
        neigh = knn_graph(X_min, k_eff)
        pick = rng.integers(0, k_eff, size=n_new)
        gaps = rng.random(n_new)
        base = X_min[seeds]
        partner = X_min[neigh[seeds, pick]]
        synthetic = base + gaps[:, None] * (partner - base)
    return data.append(synthetic, np.full(n_new, minority, dtype=np.int64))


def hybrid_resample(data: Dataset, config: SamplerConfig | None = None, rng=None,
                    minority: int | None = None, observer=None):
    """Neighbourhood cleaning, then random undersampling, then SMOTE to balance.

    RUS works on the cleaned set, and SMOTE grows the minority to the
    post-RUS majority count. Should cleaning plus undersampling leave the
    majority smaller than the minority, SMOTE grows the majority instead, so the
    output is always exactly balanced. Cleaning is skipped if it would leave
    no majority sample at all.

    ``observer``, when given, is called as ``observer(stage, dataset)`` with
    the data entering each stage.

    Returns
    -------
    balanced : Dataset
    trace : SamplingTrace
    """
    config = config or SamplerConfig()
    if rng is None:
        raise ValueError("hybrid_resample needs a seeded random generator")
    _require_both_classes(data, "hybrid resampling")
    minority = _minority_code(data, minority)
    majority = 1 - minority
    counts = data.counts()
    trace = SamplingTrace(input_minority=int(counts[minority]),
                          input_majority=int(counts[majority]))

    if observer is not None:
        observer("nc", data)
    cleaned, nc_removed = neighborhood_clean(data, config.nc_k, minority=minority)
    if cleaned.counts()[majority] == 0:
        # nothing left to balance against; keep the subset uncleaned
        logger.warning("neighbourhood cleaning would remove every majority sample; skipped")
        cleaned, nc_removed = data, nc_removed[:0]
    trace.nc_skipped = cleaned is data
    trace.removed_by_nc = nc_removed.tolist()

    if observer is not None:
        observer("rus", cleaned)
    reduced, rus_removed = random_undersample(cleaned, config.rus_fraction, rng,
                                              minority=minority)
    survivors = np.setdiff1d(np.arange(data.n_samples), nc_removed, assume_unique=True)
    trace.removed_by_rus = survivors[rus_removed].tolist()

    if observer is not None:
        observer("smote", reduced)
    n_min, n_maj = reduced.counts()[minority], reduced.counts()[majority]
    grow = minority if n_min <= n_maj else majority
    target = int(max(n_min, n_maj))
    trace.smote_k_used = smote_k_effective(int(min(n_min, n_maj)), config.smote_k)
    trace.smote_duplicated = trace.smote_k_used == 0 and n_min != n_maj
    balanced = smote(reduced, config.smote_k, target, rng, minority=grow)

    final = balanced.counts()
    trace.synthetic_count = int(balanced.n_samples - reduced.n_samples)
    trace.final_minority = int(final[minority])
    trace.final_majority = int(final[majority])
    return balanced, trace
