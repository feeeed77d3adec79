import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibrf.dataset import Dataset
from ibrf.sampling import (
    SamplerConfig,
    SamplingError,
    hybrid_resample,
    neighborhood_clean,
    random_undersample,
    smote,
    undersample_to_count,
)
from oracles import brute_knn, nc_oracle, on_segment

MIN, MAJ = 1, 0


def make(points, labels):
    return Dataset(np.asarray(points, dtype=float), labels, label_names=("maj", "min"))


def gaussian_overlap(n_min, n_maj, sep, seed, dims=2):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(n_min, dims)) + sep, rng.normal(size=(n_maj, dims))])
    y = np.r_[np.ones(n_min, int), np.zeros(n_maj, int)]
    return make(X, y)


class FixedRng:
    """Stand-in generator: neighbour choice 0, gap fixed."""

    def __init__(self, gap):
        self.gap = gap

    def integers(self, low, high, size):
        return np.zeros(size, dtype=np.int64)

    def random(self, size):
        return np.full(size, self.gap)


# ---------------------------------------------------------------- NC

def test_nc_removes_majority_surrounded_by_minority():
    pts = [[0, 0], [0.1, 0], [0, 0.1], [-0.1, 0], [0.05, 0.05],
           [10, 10], [10.1, 10], [10, 10.1], [9.9, 10], [10, 9.9]]
    y = [MAJ, MIN, MIN, MIN, MIN, MAJ, MAJ, MAJ, MAJ, MAJ]
    data = make(pts, y)
    cleaned, removed = neighborhood_clean(data, 3)
    assert removed.tolist() == nc_oracle(pts, y, 3, MIN)
    assert 0 in removed.tolist()
    assert cleaned.n_samples == data.n_samples - len(removed)


def test_nc_misclassified_minority_drops_majority_neighbours():
    # minority at origin; two majority and one minority close by
    pts = [[0, 0], [0.1, 0], [0, 0.1], [-0.12, 0],
           [-5, -5], [-5.1, -5], [-5, -5.1],
           [5, 5], [5.1, 5], [5, 5.1], [5.2, 5.2]]
    y = [MIN, MAJ, MAJ, MIN, MIN, MIN, MIN, MAJ, MAJ, MAJ, MAJ]
    data = make(pts, y)
    assert brute_knn(pts, pts[0], 3, skip=0) == [1, 2, 3]
    _, removed = neighborhood_clean(data, 3)
    assert {1, 2} <= set(removed.tolist())
    assert removed.tolist() == nc_oracle(pts, y, 3, MIN)


def test_nc_separated_classes_untouched():
    data = gaussian_overlap(20, 80, sep=50.0, seed=0)
    cleaned, removed = neighborhood_clean(data, 3)
    assert removed.size == 0
    assert cleaned.n_samples == data.n_samples


def test_nc_skipped_when_class_too_small(caplog):
    data = gaussian_overlap(3, 30, sep=0.0, seed=1)
    cleaned, removed = neighborhood_clean(data, 3)
    assert cleaned is data and removed.size == 0
    assert "skipped" in caplog.text


def test_nc_single_class_errors():
    with pytest.raises(SamplingError):
        neighborhood_clean(make(np.zeros((5, 1)), [0] * 5), 3)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10**6), n_min=st.integers(4, 25), n_maj=st.integers(4, 80),
       k=st.sampled_from([1, 3, 5]), grid=st.booleans())
def test_nc_matches_oracle_and_keeps_minority(seed, n_min, n_maj, k, grid):
    rng = np.random.default_rng(seed)
    n = n_min + n_maj
    X = rng.integers(0, 5, size=(n, 2)).astype(float) if grid else rng.normal(size=(n, 2))
    y = np.r_[np.ones(n_min, int), np.zeros(n_maj, int)]
    rng.shuffle(y)
    data = make(X, y)
    cleaned, removed = neighborhood_clean(data, k, minority=MIN)
    if min(n_min, n_maj) > k:
        assert removed.tolist() == nc_oracle(X.tolist(), y.tolist(), k, MIN)
    assert (y[removed] == MAJ).all()
    assert cleaned.counts()[MIN] == n_min
    again, removed_again = neighborhood_clean(data, k, minority=MIN)
    assert np.array_equal(removed, removed_again)


# ---------------------------------------------------------------- RUS

@pytest.mark.parametrize("n_maj, fraction, remaining", [(100, 0.2, 80), (7, 0.2, 6), (50, 0.0, 50)])
def test_rus_counts(n_maj, fraction, remaining):
    data = gaussian_overlap(5, n_maj, 1.0, seed=2)
    out, removed = random_undersample(data, fraction, np.random.default_rng(0))
    assert out.counts()[MAJ] == remaining
    assert out.counts()[MIN] == 5
    assert len(removed) == n_maj - remaining
    assert (data.labels[removed] == MAJ).all()
    if fraction == 0:
        assert out is data


def test_rus_validates_fraction():
    data = gaussian_overlap(5, 10, 1.0, seed=2)
    with pytest.raises(ValueError):
        random_undersample(data, 1.0, np.random.default_rng(0))


def test_rus_seeded():
    data = gaussian_overlap(5, 100, 1.0, seed=2)
    a = random_undersample(data, 0.3, np.random.default_rng(9))[1]
    b = random_undersample(data, 0.3, np.random.default_rng(9))[1]
    assert np.array_equal(a, b)


def test_undersample_to_count():
    data = gaussian_overlap(7, 40, 1.0, seed=3)
    out = undersample_to_count(data, 7, np.random.default_rng(0))
    assert out.counts().tolist() == [7, 7]
    with pytest.raises(SamplingError):
        undersample_to_count(data, 41, np.random.default_rng(0))


# ---------------------------------------------------------------- SMOTE

def test_smote_zero_gap_reproduces_seed():
    data = gaussian_overlap(6, 20, 1.0, seed=4)
    out = smote(data, 5, 12, FixedRng(0.0))
    minority_rows = data.features[data.labels == MIN]
    synthetic = out.features[data.n_samples:]
    assert np.array_equal(synthetic, minority_rows[np.arange(6) % 6])


def test_smote_segment_two_points():
    data = make([[0, 0], [2, 0], [5, 5], [6, 5], [5, 6]], [MIN, MIN, MAJ, MAJ, MAJ])
    out = smote(data, 1, 3, np.random.default_rng(0))
    t, y0 = out.features[-1]
    assert y0 == 0.0 and 0.0 <= t <= 2.0


def test_smote_balances_counts():
    data = gaussian_overlap(10, 50, 1.0, seed=5)
    out = smote(data, 5, 50, np.random.default_rng(1))
    assert out.counts().tolist() == [50, 50]
    assert out.n_samples - data.n_samples == 40
    assert (out.row_ids[data.n_samples:] == -1).all()


def test_smote_single_minority_duplicates():
    data = make([[1, 1], [5, 5], [6, 5], [5, 6]], [MIN, MAJ, MAJ, MAJ])
    out = smote(data, 5, 3, np.random.default_rng(0))
    assert np.array_equal(out.features[-2:], [[1, 1], [1, 1]])


def test_smote_rejects_shrinking_target():
    data = gaussian_overlap(10, 50, 1.0, seed=5)
    with pytest.raises(ValueError):
        smote(data, 5, 9, np.random.default_rng(1))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n_min=st.integers(2, 20), extra=st.integers(0, 60),
       k=st.integers(1, 7))
def test_smote_synthetics_on_neighbour_segments(seed, n_min, extra, k):
    data = gaussian_overlap(n_min, n_min + extra, 0.5, seed, dims=3)
    out = smote(data, k, n_min + extra, np.random.default_rng(seed))
    X_min = data.features[data.labels == MIN].tolist()
    k_eff = min(k, n_min - 1)
    for j, s in enumerate(out.features[data.n_samples:].tolist()):
        seed_i = j % n_min
        neigh = brute_knn(X_min, X_min[seed_i], k_eff, skip=seed_i)
        assert any(on_segment(s, X_min[seed_i], X_min[q]) for q in neigh)


# ---------------------------------------------------------------- hybrid

def test_hybrid_identity_stages_on_separated_data():
    data = gaussian_overlap(15, 60, sep=50.0, seed=6)
    out, trace = hybrid_resample(data, SamplerConfig(rus_fraction=0.0), np.random.default_rng(0))
    assert trace.removed_by_nc == [] and trace.removed_by_rus == []
    assert trace.synthetic_count == 60 - 15
    assert out.counts().tolist() == [60, 60]


def test_hybrid_trace_json_and_stage_counts():
    data = gaussian_overlap(20, 100, sep=1.0, seed=7)
    out, trace = hybrid_resample(data, SamplerConfig(), np.random.default_rng(3))
    doc = json.loads(json.dumps(trace.to_dict()))
    n_nc = len(doc["removed_by_nc"])
    assert len(doc["removed_by_rus"]) == int(0.2 * (100 - n_nc))
    assert doc["final_minority"] == doc["final_majority"] == 100 - n_nc - len(doc["removed_by_rus"])
    assert not set(doc["removed_by_nc"]) & set(doc["removed_by_rus"])


def test_hybrid_nc_removal_band_report(capsys):
    """Reports how much NC removes on an overlapping IR=5 set (not asserted)."""
    data = gaussian_overlap(40, 200, sep=1.0, seed=8)
    _, trace = hybrid_resample(data, SamplerConfig(), np.random.default_rng(0))
    share = len(trace.removed_by_nc) / data.n_samples
    assert 0 <= len(trace.removed_by_nc) <= 200
    print(f"NC removed {share:.1%} of samples (typical band quoted for real data: 10-20%)")


def test_hybrid_fallback_tiny_minority():
    data = gaussian_overlap(2, 30, sep=0.3, seed=9)
    out, trace = hybrid_resample(data, SamplerConfig(), np.random.default_rng(0))
    assert trace.nc_skipped
    assert trace.smote_k_used == 1
    assert out.counts()[0] == out.counts()[1]


def test_hybrid_keeps_majority_when_nc_would_erase_it():
    # each majority point sits inside a tight minority cluster
    pts, y = [], []
    for c in range(5):
        pts.append([10.0 * c, 0.0])
        y.append(MAJ)
        pts += [[10.0 * c + 0.1, 0.0], [10.0 * c, 0.1], [10.0 * c - 0.1, 0.0]]
        y += [MIN] * 3
    data = make(pts, y)
    assert neighborhood_clean(data, 3, minority=MIN)[0].counts()[MAJ] == 0
    out, trace = hybrid_resample(data, SamplerConfig(), np.random.default_rng(0), minority=MIN)
    assert trace.nc_skipped and trace.removed_by_nc == []
    assert out.counts()[MAJ] == out.counts()[MIN]


def test_hybrid_seed_determinism():
    data = gaussian_overlap(20, 100, sep=1.0, seed=10)
    a, _ = hybrid_resample(data, SamplerConfig(), np.random.default_rng(5))
    b, _ = hybrid_resample(data, SamplerConfig(), np.random.default_rng(5))
    assert a.features.tobytes() == b.features.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n_min=st.integers(1, 30), extra=st.integers(0, 150),
       sep=st.floats(0, 3), frac=st.sampled_from([0.0, 0.2, 0.5]))
def test_hybrid_always_balanced(seed, n_min, extra, sep, frac):
    data = gaussian_overlap(n_min, n_min + extra + 1, sep, seed)
    out, trace = hybrid_resample(data, SamplerConfig(rus_fraction=frac),
                                 np.random.default_rng(seed), minority=MIN)
    assert out.counts()[0] == out.counts()[1]
    assert trace.final_minority == trace.final_majority
    assert not set(trace.removed_by_nc) & set(trace.removed_by_rus)
