import json
import math

import numpy as np
import pytest

from repboot.core import IndicatorId, IndicatorSchema, IndicatorValue, Layer, ServiceRecord
from repboot.forest import (DecisionForest, DecisionTree, FeatureEncoder, FeatureMatrix,
                            ForestParams, build_forest, default_subsets, entropy,
                            format_importance_table, gini, grow_tree, importance_report,
                            layer_importance, mda_importance, mdcd_columns, mdcd_importance,
                            node_importance, oob_error, predict_forest, vote_confidence)
from oracles import brute_tree, same_structure, walk


def tree_to_nested(tree: DecisionTree, i=0):
    d = {"counts": tree.counts[i].tolist()}
    if tree.feature[i] >= 0:
        d.update(feature=int(tree.feature[i]), threshold=float(tree.threshold[i]),
                 absent_left=bool(tree.absent_left[i]),
                 left=tree_to_nested(tree, tree.left[i]), right=tree_to_nested(tree, tree.right[i]))
    return d


def small_dataset(rng, n=None, f=None, with_nan=True):
    n = n or int(rng.integers(2, 17))
    f = f or int(rng.integers(1, 4))
    categorical = rng.random(f) < 0.4
    X = np.empty((n, f))
    for c in range(f):
        if categorical[c]:
            X[:, c] = rng.integers(0, 3, n)
        else:
            X[:, c] = np.round(rng.random(n), 1)  # coarse values force ties
        if with_nan:
            X[rng.random(n) < 0.15, c] = np.nan
    y = rng.integers(1, 4, n)
    return X, y, categorical


def test_entropy_and_gini_values():
    assert entropy(np.array([2, 2])) == pytest.approx(1.0)
    assert entropy(np.array([4, 0])) == 0.0
    assert gini(np.array([1, 1, 1, 1])) == pytest.approx(0.75)


@pytest.mark.parametrize("seed", range(25))
def test_grow_tree_matches_exhaustive_search(seed):
    rng = np.random.default_rng(seed)
    X, y, cat = small_dataset(rng)
    tree = grow_tree(X, y, 3, cat)
    ref = brute_tree(X.tolist(), y.tolist(), 3, list(cat))
    assert same_structure(tree_to_nested(tree), ref)
    probe = np.where(rng.random(X.shape) < 0.1, np.nan, np.round(rng.random(X.shape), 1))
    for x in probe:
        assert tree.predict(x[None])[0] == walk(ref, list(x), list(cat))


def test_pure_node_is_leaf_and_training_fit():
    X = np.array([[0.1], [0.2], [0.3]])
    assert grow_tree(X, [2, 2, 2], 3).n_nodes == 1
    rng = np.random.default_rng(0)
    X = rng.random((40, 3))
    y = rng.integers(1, 4, 40)
    assert (grow_tree(X, y, 3).predict(X) == y).all()


def test_absent_rows_follow_majority_child():
    X = np.array([[0.1], [0.2], [0.3], [0.9], [np.nan]])
    y = np.array([1, 1, 1, 2, 2])
    tree = grow_tree(X, y, 2)
    assert tree.feature[0] == 0 and tree.absent_left[0]
    assert tree.predict(np.array([[np.nan]]))[0] == 1


def test_max_depth_and_min_node_size():
    rng = np.random.default_rng(1)
    X, y = rng.random((50, 2)), rng.integers(1, 4, 50)
    assert grow_tree(X, y, 3, max_depth=2).depth <= 2
    assert grow_tree(X, y, 3, min_node_size=60).n_nodes == 1


def test_tree_json_roundtrip():
    rng = np.random.default_rng(2)
    X, y, cat = small_dataset(rng, 16, 3)
    tree = grow_tree(X, y, 3, cat)
    back = DecisionTree.from_dict(json.loads(json.dumps(tree.to_dict())))
    assert same_structure(tree_to_nested(back), tree_to_nested(tree))


def planted_matrix(seed, n=200):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 4))
    y = np.where(X[:, 0] > 0.5, 2, 1)
    y = np.where(X[:, 1] > 0.8, 3, y)
    groups = [np.array([c]) for c in range(4)]
    layers = [Layer.PROVIDER, Layer.COMMUNITY, Layer.INSIGHT, Layer.INSIGHT]
    return FeatureMatrix(X, y, np.zeros(4, bool), groups, ["a", "b", "c", "d"], 3, layers)


def test_forest_size_and_determinism():
    fm = planted_matrix(0, 80)
    params = ForestParams(n_outer=3, m_vertical=2)
    f1 = build_forest(fm, params=params, seed=5)
    f2 = build_forest(fm, params=params, seed=5)
    assert len(f1) == 9
    assert json.dumps(f1.to_dict()) == json.dumps(f2.to_dict())
    restricted = [t for t in f1.trees if t.subset is not None]
    assert len(restricted) == 6
    for t in restricted:
        used = set(t.feature[t.feature >= 0].tolist())
        assert used <= set(t.columns.tolist())


def test_default_subsets_cover_layers_and_parity():
    fm = planted_matrix(0, 10)
    subsets = default_subsets(fm)
    assert (0,) in subsets and (2, 3) in subsets and (0, 2) in subsets and (1, 3) in subsets


def test_forest_vote_and_tie_break():
    fm = planted_matrix(1, 150)
    forest = build_forest(fm, params=ForestParams(n_outer=5), seed=0)
    votes = forest.votes(fm.X)
    pred = predict_forest(forest, fm.X)
    assert (pred == np.argmax(votes, axis=1) + 1).all()
    levels, conf = vote_confidence(forest, fm.X)
    assert (levels == pred).all() and (conf > 0).all() and (conf <= 1).all()
    # a two-tree forest split evenly must pick the lower level
    t1 = grow_tree(np.array([[0.0], [1.0]]), [1, 1], 2)
    t2 = grow_tree(np.array([[0.0], [1.0]]), [2, 2], 2)
    tie = DecisionForest([t1, t2], 2, 2, np.array([False]), [np.array([0])], ["x"])
    assert predict_forest(tie, np.array([0.5])) == 1


def test_oob_error_matches_recount():
    fm = planted_matrix(2, 100)
    forest = build_forest(fm, params=ForestParams(n_outer=4, m_vertical=1), seed=3)
    rep = oob_error(forest, fm)
    wrong = total = 0
    for t, tree in enumerate(forest.trees):
        oob = sorted(set(range(100)) - set(tree.bag.tolist()))
        miss = sum(int(tree.predict(fm.X[[r]])[0] != fm.y[r]) for r in oob)
        assert rep.per_tree[t] == pytest.approx(miss / len(oob))
        wrong += miss
        total += len(oob)
    assert rep.aggregate == pytest.approx(wrong / total)
    assert rep.excluded == []


def test_oob_excludes_trees_without_oob_rows():
    fm = planted_matrix(0, 1)
    forest = build_forest(fm, params=ForestParams(n_outer=2, m_vertical=0), seed=0)
    rep = oob_error(forest, fm)
    assert rep.excluded == [0, 1] and math.isnan(rep.aggregate)


def test_node_importance_formula():
    assert node_importance(1.0, 10, 0.5, 4, 0.0, 6) == pytest.approx(8.0)


def test_mdcd_matches_manual_sum():
    fm = planted_matrix(3, 60)
    forest = build_forest(fm, params=ForestParams(n_outer=2, m_vertical=1), seed=1)
    manual = np.zeros(4)
    for tree in forest.trees:
        for i in range(tree.n_nodes):
            if tree.feature[i] >= 0:
                l, r = tree.left[i], tree.right[i]
                manual[tree.feature[i]] += (tree.impurity[i] * tree.n_samples[i]
                                            - tree.impurity[l] * tree.n_samples[l]
                                            - tree.impurity[r] * tree.n_samples[r])
    assert np.allclose(mdcd_columns(forest), manual / len(forest.trees), atol=1e-10)
    assert mdcd_importance(forest).sum() == pytest.approx(1.0)


def test_importance_finds_planted_features():
    fm = planted_matrix(4, 300)
    forest = build_forest(fm, params=ForestParams(n_outer=6), seed=0)
    mda, std = mda_importance(forest, fm, n_repeats=2, seed=0)
    assert set(np.argsort(-mda)[:2]) == {0, 1}
    assert set(np.argsort(-mdcd_importance(forest))[:2]) == {0, 1}
    assert (std >= 0).all()
    layers = layer_importance(importance_report(forest, fm, 2, 0))
    assert layers[0].layer in (Layer.PROVIDER, Layer.COMMUNITY)
    assert all(0 <= l.mda <= 1 and 0 <= l.mdcd <= 1 for l in layers)
    assert [l.average for l in layers] == sorted((l.average for l in layers), reverse=True)
    assert "Provider layer" in format_importance_table(layers)


def test_encoder_marks_absent_as_nan_and_unknown_tags():
    a, b = IndicatorId(Layer.PROVIDER, "a"), IndicatorId(Layer.INSIGHT, "b")
    schema = IndicatorSchema((a, b), {a: ("x", "y")})
    enc = FeatureEncoder(schema)
    X = enc.encode([ServiceRecord("s", {a: IndicatorValue("zzz", 0.3)})])
    assert X[0, 0] == schema.types[a].index("U") and X[0, 1] == 0.3
    assert np.isnan(X[0, 2:]).all()
    forest = build_forest(enc.matrix([ServiceRecord("s", {a: IndicatorValue("x", 0.3)}, 1),
                                      ServiceRecord("t", {a: IndicatorValue("y", 0.9)}, 2)], 2),
                          params=ForestParams(n_outer=2, m_vertical=0), seed=0, encoder=enc)
    assert predict_forest(forest, ServiceRecord("u", {a: IndicatorValue("x", 0.3)})) in (1, 2)


def test_forest_json_roundtrip():
    fm = planted_matrix(5, 50)
    forest = build_forest(fm, params=ForestParams(n_outer=2, m_vertical=1), seed=0)
    back = DecisionForest.from_dict(json.loads(json.dumps(forest.to_dict())))
    assert (back.votes(fm.X) == forest.votes(fm.X)).all()


def test_feature_matrix_validation():
    with pytest.raises(ValueError):
        FeatureMatrix(np.array([[1.5]]), [1], [False], [[0]], ["a"], 2)
    with pytest.raises(ValueError):
        FeatureMatrix(np.array([[0.5]]), [3], [False], [[0]], ["a"], 2)
    with pytest.raises(ValueError):
        ForestParams(criterion="chi")
