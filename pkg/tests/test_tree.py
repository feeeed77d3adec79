import json
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibrf.dataset import Dataset
from ibrf.tree import DecisionTree, best_split, fit_tree, gini, predict_proba_tree
from oracles import cart_oracle, gini_exact


@pytest.mark.parametrize("counts, expected", [((5, 5), 0.5), ((10, 0), 0.0), ((3, 1), 0.375)])
def test_gini(counts, expected):
    assert gini(counts) == pytest.approx(expected, abs=1e-15)
    assert float(gini_exact(counts)) == pytest.approx(expected, abs=1e-15)


def test_gini_empty():
    with pytest.raises(ValueError):
        gini((0, 0))


def test_best_split_perfect_separator():
    rule, dec = best_split(np.array([[0.0], [1.0], [10.0], [11.0]]), [0, 0, 1, 1], [0])
    assert rule.feature_index == 0
    assert rule.threshold == 5.5
    assert dec == pytest.approx(0.5)


def test_best_split_constant_feature():
    assert best_split(np.ones((4, 1)), [0, 1, 0, 1], [0]) is None


def _split_oracle(X, y):
    """Every (feature, midpoint) pair scored exactly; lowest (feature, threshold) on ties."""
    n = len(y)
    parent = gini_exact((n - sum(y), sum(y)))
    best = None
    for f in range(X.shape[1]):
        vals = sorted(set(Fraction(v) for v in X[:, f]))
        for lo, hi in zip(vals, vals[1:]):
            thr = (lo + hi) / 2
            left = [i for i in range(n) if Fraction(X[i, f]) <= thr]
            right = [i for i in range(n) if i not in left]
            lc = (sum(1 for i in left if y[i] == 0), sum(1 for i in left if y[i] == 1))
            rc = (sum(1 for i in right if y[i] == 0), sum(1 for i in right if y[i] == 1))
            dec = parent - (Fraction(len(left), n) * gini_exact(lc)
                            + Fraction(len(right), n) * gini_exact(rc))
            if best is None or dec > best[0]:
                best = (dec, f, thr)
    if best is None or best[0] <= 0:
        return None
    return best


def test_best_split_matches_exhaustive_oracle():
    rng = np.random.default_rng(3)
    for trial in range(40):
        X = rng.normal(size=(20, 3)) if trial % 2 else rng.integers(0, 4, size=(20, 3)).astype(float)
        y = rng.integers(0, 2, size=20)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        got = best_split(X, y, [0, 1, 2])
        want = _split_oracle(X, y.tolist())
        if want is None:
            assert got is None
            continue
        rule, dec = got
        assert rule.feature_index == want[1]
        assert dec == pytest.approx(float(want[0]), abs=1e-12)
        # threshold falls in the same gap as the exact midpoint
        col = X[:, want[1]]
        assert np.array_equal(col <= rule.threshold, col <= float(want[2]))


def test_separable_data_fits_perfectly():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 3))
    y = (X @ np.array([1.0, -2.0, 0.5]) > 0.1).astype(int)
    data = Dataset(X, y)
    tree = fit_tree(data, max_features=3)
    assert (tree.predict(X) == y).all()
    proba = tree.predict_proba(X)
    assert np.allclose(proba[np.arange(80), y], 1.0)


def test_single_sample():
    tree = fit_tree(Dataset([[1.0, 2.0]], [1]), max_features=2)
    assert tree.n_nodes == 1
    assert predict_proba_tree(tree, np.array([0.0, 0.0])).tolist() == [0.0, 1.0]


def test_leaf_normalisation():
    tree = DecisionTree([-1], [0.0], [-1], [-1], [[3, 1]], n_features=1, max_features=1)
    assert predict_proba_tree(tree, np.array([0.0])).tolist() == [0.75, 0.25]
    tree = DecisionTree([-1], [0.0], [-1], [-1], [[0, 7]], n_features=1, max_features=1)
    assert predict_proba_tree(tree, np.array([4.0])).tolist() == [0.0, 1.0]


def test_dimension_mismatch():
    tree = fit_tree(Dataset([[1.0, 2.0], [3.0, 1.0]], [0, 1]), max_features=2)
    with pytest.raises(ValueError):
        tree.predict_proba(np.zeros((1, 3)))


def test_same_seed_same_tree():
    rng = np.random.default_rng(1)
    data = Dataset(rng.normal(size=(200, 6)), rng.integers(0, 2, 200))
    a = fit_tree(data, None, np.random.default_rng(42))
    b = fit_tree(data, None, np.random.default_rng(42))
    assert a.structure() == b.structure()
    assert a.max_features == 2


def test_json_round_trip():
    rng = np.random.default_rng(2)
    data = Dataset(rng.normal(size=(100, 3)), rng.integers(0, 2, 100))
    tree = fit_tree(data, None, np.random.default_rng(0))
    back = DecisionTree.from_dict(json.loads(json.dumps(tree.to_dict())))
    X = rng.normal(size=(50, 3))
    assert np.array_equal(back.predict_proba(X), tree.predict_proba(X))
    assert back.n_nodes == tree.n_nodes


def _check_structure(tree, data):
    """Leaves nonempty, two children per internal node, impurity never rises."""
    for node in range(tree.n_nodes):
        counts = tree.counts[node]
        assert counts.sum() >= 1
        if tree.is_leaf(node):
            continue
        left, right = tree.left[node], tree.right[node]
        assert left > 0 and right > 0
        n = counts.sum()
        child = (tree.counts[left].sum() * gini(tree.counts[left])
                 + tree.counts[right].sum() * gini(tree.counts[right])) / n
        assert child < gini(counts)
        assert (tree.counts[left] + tree.counts[right] == counts).all()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 80), d=st.integers(1, 5))
def test_structure_and_routing(seed, n, d):
    rng = np.random.default_rng(seed)
    data = Dataset(rng.integers(0, 5, size=(n, d)).astype(float), rng.integers(0, 2, n))
    tree = fit_tree(data, None, rng)
    _check_structure(tree, data)
    probe = rng.normal(scale=5, size=(30, d))
    leaves = tree.apply(probe)
    assert all(tree.is_leaf(leaf) for leaf in leaves)
    proba = tree.predict_proba(probe)
    assert (proba >= 0).all()
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-12)


def test_exhaustive_oracle_small_grid():
    # every labelling of a 3x2 grid of points
    pts = np.array(list(product([0.0, 1.0, 2.0], [0.0, 1.0])))
    for labels in product([0, 1], repeat=len(pts)):
        y = np.array(labels)
        tree = fit_tree(Dataset(pts, y), max_features=2)
        want = cart_oracle(pts.tolist(), y.tolist())
        got = tree.counts[tree.apply(pts)]
        assert [tuple(c) for c in got.tolist()] == [tuple(w) for w in want]
