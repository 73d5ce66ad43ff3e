import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biasamp.classifiers import (
    DecisionTree,
    FeatureMatrix,
    TreeNode,
    as_features,
    gini,
    train_tree,
    tree_predict,
)
from biasamp.core import CategoricalLabels


def _labels(values, k=2):
    return CategoricalLabels(np.asarray(values), k)


class TestGini:
    def test_values(self):
        assert gini(np.array([5.0, 5.0])) == 0.5
        assert gini(np.array([4.0, 0.0])) == 0.0
        assert gini(np.array([0.0, 0.0])) == 0.0


class TestTrain:
    def test_single_threshold_midpoint(self):
        x = as_features([[1], [2], [3], [10], [11], [12]])
        tree = train_tree(x, _labels([0, 0, 0, 1, 1, 1]), max_depth=3, min_leaf=1)
        assert tree.feature == 0 and tree.threshold == 6.5
        assert tree.left.is_leaf and tree.right.is_leaf
        assert tree_predict(tree, x).codes.tolist() == [0, 0, 0, 1, 1, 1]

    def test_pure_node_is_leaf(self):
        tree = train_tree(as_features([[1], [2]]), _labels([1, 1]), min_leaf=1)
        assert tree.is_leaf and tree.label == 1

    def test_xor_needs_depth_two(self):
        x = as_features([[0, 0], [0, 1], [1, 0], [1, 1]] * 5)
        y = _labels([0, 1, 1, 0] * 5)
        assert train_tree(x, y, max_depth=1, min_leaf=1).is_leaf
        # No single split reduces impurity, so greedy growth stops at the root.
        assert train_tree(x, y, max_depth=None, min_leaf=1).is_leaf

    def test_tie_picks_lowest_threshold(self):
        x = as_features([[0], [1], [2], [3]])
        tree = train_tree(x, _labels([0, 1, 0, 1]), max_depth=1, min_leaf=1)
        # Thresholds 0.5 and 2.5 tie on weighted Gini.
        assert tree.threshold == 0.5

    def test_min_leaf_respected(self):
        rng = np.random.default_rng(0)
        x = as_features(rng.normal(size=(200, 3)))
        y = _labels((rng.random(200) < 0.5).astype(int))
        tree = train_tree(x, y, max_depth=None, min_leaf=10)

        def sizes(node, idx):
            if node.is_leaf:
                yield idx.size
                return
            mask = x.rows[idx, node.feature] <= node.threshold
            yield from sizes(node.left, idx[mask])
            yield from sizes(node.right, idx[~mask])

        assert min(sizes(tree, np.arange(200))) >= 10

    def test_max_depth(self):
        rng = np.random.default_rng(1)
        x = as_features(rng.normal(size=(300, 2)))
        y = _labels((x.rows[:, 0] * x.rows[:, 1] > 0).astype(int))
        assert train_tree(x, y, max_depth=3, min_leaf=1).depth() <= 3

    def test_errors(self):
        with pytest.raises(ValueError):
            train_tree(as_features([[1.0]]), _labels([0, 1]))
        with pytest.raises(ValueError):
            train_tree(as_features([[1.0], [2.0]]), _labels([0, 1]), min_leaf=3)
        with pytest.raises(ValueError):
            FeatureMatrix(np.array([[np.nan]]))

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_training_accuracy_at_least_majority(self, seed):
        rng = np.random.default_rng(seed)
        n = 60
        x = as_features(rng.integers(0, 5, size=(n, 2)))
        y = _labels(rng.integers(0, 3, size=n), 3)
        tree = train_tree(x, y, max_depth=4, min_leaf=2)
        acc = tree_predict(tree, x).agreement(y)
        assert acc >= y.histogram().max() / n


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(2)
        x = as_features(rng.normal(size=(150, 4)))
        y = _labels((x.rows[:, 1] + 0.3 * x.rows[:, 2] > 0).astype(int))
        model = DecisionTree(max_depth=4, min_leaf=3).fit(x, y)
        restored = TreeNode.from_json(model.to_json())
        assert np.array_equal(tree_predict(restored, x).codes, model.predict(x).codes)
        assert restored.to_json(4) == model.to_json()

    def test_rejects_unknown_format(self):
        with pytest.raises(ValueError):
            TreeNode.from_json('{"format": "other", "version": 1, "nodes": []}')

    def test_feature_count_checked(self):
        model = DecisionTree().fit(as_features([[0.0, 1.0]] * 10), _labels([0] * 10))
        with pytest.raises(ValueError):
            model.predict(as_features([[0.0]]))

    def test_unfitted(self):
        with pytest.raises(RuntimeError):
            DecisionTree().predict(as_features([[0.0]]))
