import numpy as np
import pytest

from sohprint.tree import RegressionTree, quantize, tree_predict, tree_train

from oracles import best_split_brute


def sse(tree, X, y):
    pred = np.array([tree_predict(tree, x, None) for x in X])
    return float(np.sum((pred - y) ** 2))


def test_constant_labels_single_leaf():
    X = np.random.default_rng(0).normal(size=(20, 3))
    t = tree_train(X, np.full(20, 0.9))
    assert t.root.is_leaf and t.depth() == 0
    assert tree_predict(t, [5, 5, 5]) == 0.9
    assert tree_predict(t, [-5, 0, 1]) == 0.9


def test_planted_step():
    x = np.linspace(-1, 1, 100)
    x = x[np.abs(x) > 0.01]
    y = np.where(x < 0, 0.8, 1.0)
    t = tree_train(x[:, None], y)
    assert t.depth() == 1
    gap = (x[x < 0].max(), x[x > 0].min())
    assert gap[0] < t.root.threshold < gap[1]


def test_first_split_matches_brute_force():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    y = 0.8 + 0.1 * (X[:, 1] > 0.3) + 0.01 * rng.normal(size=40)
    t = tree_train(X, y, min_leaf=5, max_depth=1)
    cost, feat, _ = best_split_brute(X, y, 5)
    assert t.root.feature == feat
    assert sse(t, X, y) == pytest.approx(cost, rel=1e-9)


def test_tie_breaks_to_lower_feature():
    x = np.arange(20.0)
    X = np.column_stack([x, x])
    y = np.where(x < 10, 0.8, 0.9)
    assert tree_train(X, y).root.feature == 0


def test_resubstitution_and_quantized():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 2))
    y = rng.uniform(0.7, 1.0, 60)
    t = tree_train(X, y)
    for x in X[:10]:
        raw = tree_predict(t, x, None)
        q = tree_predict(t, x)
        assert abs(q - raw) <= 0.0005 + 1e-12
        assert abs(q * 1000 - round(q * 1000)) < 1e-9
    assert all(lf.n >= 5 for lf in t.leaves())


def test_sse_non_increasing_with_depth():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(120, 3))
    y = 0.9 + 0.05 * np.sin(X[:, 0]) + 0.01 * rng.normal(size=120)
    errs = [sse(tree_train(X, y, max_depth=d), X, y) for d in range(6)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_permutation_invariance():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 2))
    y = rng.uniform(0.7, 1.0, 50)
    p = rng.permutation(50)
    a, b = tree_train(X, y), tree_train(X[p], y[p])
    Q = rng.normal(size=(30, 2))
    assert [tree_predict(a, q) for q in Q] == [tree_predict(b, q) for q in Q]


def test_quantize_half_up():
    assert quantize(0.8125, 0.001) == 0.813
    assert quantize(0.8124999, 0.001) == 0.812
    assert quantize(-0.0005, 0.001) == -0.001


def test_errors_and_round_trip():
    with pytest.raises(ValueError):
        tree_train(np.zeros((1, 2)), [0.9])
    X = np.random.default_rng(5).normal(size=(30, 2))
    t = tree_train(X, np.linspace(0.7, 1, 30))
    again = RegressionTree.from_dict(t.to_dict())
    assert [tree_predict(again, x) for x in X] == [tree_predict(t, x) for x in X]
    with pytest.raises(ValueError):
        tree_predict(t, [1.0])
