import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

import numpy as np

from lateral_vision.classification.types import InputDomainError

from ..forest import (EmptyTrainingSet, FeatureDimensionMismatch, ForestFormatNotSupported, ForestParams,
                      NotValidForestParams, RandomForest, average_probabilities)
from ..tree import LEAF, DecisionTree, best_split_for_feature, gini


def gaussian_blobs(rng, centers, n_per_center, std):
    X = np.concatenate([rng.normal(center, std, size=(n_per_center, len(center))) for center in centers])
    y = np.repeat(np.arange(len(centers)), n_per_center)
    return X, y


def xor_blobs(rng, n_per_blob=50, std=.3):
    X, blob = gaussian_blobs(rng, [(-1, -1), (1, 1), (-1, 1), (1, -1)], n_per_blob, std)
    return X, (blob >= 2).astype(np.int64)


def walk(tree, x):
    """
    Follow the splits of `tree` one node at a time
    :return: Reached leaf
    """
    node = 0
    while tree.feature[node] != LEAF:
        node = tree.left[node] if x[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
    return node


def cross_validate(X, y, params, k=5, seed=0):
    """
    :return: Accuracy of a forest trained on the other folds, over every instance
    """
    assignment = np.random.default_rng(seed).permutation(y.size) % k
    correct = 0
    for fold in range(k):
        test = assignment == fold
        forest = RandomForest.fit(X[~test], y[~test], params, n_classes=int(y.max()) + 1)
        correct += int(np.count_nonzero(forest.predict(X[test]) == y[test]))
    return correct / y.size


class TestDecisionTree(SimpleTestCase):
    def test_gini(self):
        np.testing.assert_allclose(gini(np.array([[5., 5.], [4., 0.], [0., 0.]])), [.5, 0., 0.])

    def test_best_split_for_feature(self):
        split = best_split_for_feature(np.array([4., 1., 3., 2.]), np.array([1, 0, 1, 0]), 2, .5)
        self.assertEqual(split.threshold, 2.5)
        self.assertEqual(split.gain, .5)
        self.assertIsNone(best_split_for_feature(np.ones(4), np.array([0, 1, 0, 1]), 2, .5))

        # Ties resolve to the smallest threshold
        split = best_split_for_feature(np.array([1., 2., 3.]), np.array([0, 1, 0]), 2, 4. / 9.)
        self.assertEqual(split.threshold, 1.5)

    def test_grow(self):
        rng = np.random.default_rng(0)
        X, y = xor_blobs(rng, n_per_blob=20)
        tree = DecisionTree.grow(X, y, 2, 2, rng, debug=True)
        np.testing.assert_array_equal(tree.predict(X), y)
        self.assertEqual(tree.n_leaves, tree.n_nodes - len(tree.split_logs))
        for log in tree.split_logs:
            self.assertEqual(log.chosen.gain, max(candidate.gain for candidate in log.candidates))
            self.assertEqual(tree.feature[log.node], log.chosen.feature)

        stump = DecisionTree.grow(X, y, 2, 2, rng, max_depth=0)
        self.assertEqual(stump.n_nodes, 1)
        self.assertTrue(stump.is_leaf(0))
        self.assertEqual(stump.feature[0], LEAF)
        self.assertEqual(stump.predict(X).tolist(), [0] * y.size)

    def test_routing(self):
        rng = np.random.default_rng(5)
        for i in range(20):
            X, y = gaussian_blobs(rng, rng.normal(0., 2., size=(3, 4)), 15, 1.)
            tree = DecisionTree.grow(X, y, 3, int(rng.integers(1, 5)), rng, max_depth=None if i % 2 else 3)
            # Unseen rows, some of them exactly on the thresholds
            rows = rng.normal(0., 3., size=(30, 4))
            split_nodes = np.flatnonzero(tree.feature != LEAF)
            for row, node in zip(rows, rng.choice(split_nodes, size=min(10, split_nodes.size), replace=False)):
                row[tree.feature[node]] = tree.threshold[node]
            leaves = [walk(tree, row) for row in rows]
            np.testing.assert_array_equal(tree.apply(rows), leaves)
            np.testing.assert_array_equal(tree.predict(rows), [tree.leaf_class(leaf) for leaf in leaves])
            self.assertTrue(all(tree.is_leaf(leaf) for leaf in leaves))

    def test_constant_features(self):
        X = np.ones((6, 3))
        tree = DecisionTree.grow(X, np.array([0, 1, 2, 0, 1, 1]), 3, 1, np.random.default_rng(1))
        self.assertEqual(tree.n_nodes, 1)
        self.assertEqual(tree.leaf_class(0), 1)

    def test_falls_back_to_unscored_features(self):
        # Only the last feature separates the classes, a single feature is scored per node
        X = np.zeros((8, 5))
        X[:, 4] = np.arange(8)
        y = (np.arange(8) >= 4).astype(np.int64)
        tree = DecisionTree.grow(X, y, 2, 1, np.random.default_rng(3))
        np.testing.assert_array_equal(tree.predict(X), y)
        self.assertEqual(tree.split_counts(5).tolist(), [0, 0, 0, 0, 1])


class TestRandomForest(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(42)

    def test_deterministic(self):
        X, y = gaussian_blobs(self.rng, [(0, 0, 0), (2, 2, 0), (0, 2, 2)], 30, 1.)
        params = ForestParams(n_trees=15, seed=7)
        first = RandomForest.fit(X, y, params)
        self.assertEqual(RandomForest.fit(X, y, params).to_dict(), first.to_dict())
        self.assertNotEqual(RandomForest.fit(X, y, ForestParams(n_trees=15, seed=8)).to_dict()['trees'],
                            first.to_dict()['trees'])

        threaded = RandomForest.fit(X, y, ForestParams(n_trees=15, seed=7, n_jobs=4))
        self.assertEqual(threaded.to_dict()['trees'], first.to_dict()['trees'])
        np.testing.assert_array_equal(threaded.oob_masks, first.oob_masks)

    def test_oob_fraction(self):
        n = 500
        X = self.rng.random((n, 2))
        y = (X[:, 0] > .5).astype(np.int64)
        forest = RandomForest.fit(X, y, ForestParams(n_trees=40, max_depth=1))
        # A sample misses a bootstrap draw of n with probability (1 - 1/n)^n, about 0.368
        self.assertAlmostEqual(forest.oob_fraction(), (1. - 1. / n) ** n, delta=.05)

    def test_oob_close_to_cross_validation(self):
        X, y = gaussian_blobs(self.rng, [(0, 0), (1.5, 0), (0, 1.5)], 100, .8)
        params = ForestParams(n_trees=40, seed=1)
        forest = RandomForest.fit(X, y, params)
        report = forest.oob_score(X, y)
        self.assertEqual(report.evaluated + report.excluded, y.size)
        self.assertEqual(report.excluded, 0)
        self.assertLessEqual(abs(report.score - cross_validate(X, y, params)), .10)

    def test_xor_blobs(self):
        X, y = xor_blobs(self.rng)
        self.assertGreaterEqual(cross_validate(X, y, ForestParams(n_trees=25, seed=3)), .9)

    def test_predict_proba(self):
        X, y = gaussian_blobs(self.rng, [(0, 0), (5, 5)], 20, .5)
        forest = RandomForest.fit(X, y, ForestParams(n_trees=10))
        probabilities = forest.predict_proba_many(X)
        np.testing.assert_allclose(probabilities.sum(axis=1), 1.)
        vector = forest.predict_proba(np.array([5., 5.]))
        self.assertEqual(vector.top()[0].index, 1)
        self.assertEqual(forest.predict(np.array([[0., 0.], [5., 5.]])).tolist(), [0, 1])

        averaged = average_probabilities([forest, forest], [np.array([0., 0.]), np.array([5., 5.])])
        self.assertAlmostEqual(float(averaged.values.sum()), 1.)
        with self.assertRaises(FeatureDimensionMismatch):
            average_probabilities([forest], [])
        with self.assertRaises(FeatureDimensionMismatch):
            forest.predict(np.zeros((1, 3)))
        with self.assertRaises(FeatureDimensionMismatch):
            forest.predict_proba(np.zeros((1, 2)))

    def test_save_load(self):
        X, y = gaussian_blobs(self.rng, [(0, 0), (3, 0), (0, 3)], 15, 1.)
        forest = RandomForest.fit(X, y, ForestParams(n_trees=8, seed=5))
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'forest.json'
            forest.save(path)
            loaded = RandomForest.load(path)
            self.assertEqual(loaded.to_dict(), forest.to_dict())
            np.testing.assert_array_equal(loaded.predict_proba_many(X), forest.predict_proba_many(X))

            data = json.loads(path.read_text())
            data['version'] = '2.0.0'
            with self.assertRaises(ForestFormatNotSupported):
                RandomForest.from_dict(data)

        # Out-of-bag membership is not persisted
        with self.assertRaises(InputDomainError):
            loaded.oob_score(X, y)

    def test_not_valid_input(self):
        with self.assertRaises(EmptyTrainingSet):
            RandomForest.fit(np.zeros((0, 3)), [])
        with self.assertRaises(InputDomainError):
            RandomForest.fit(np.zeros((3, 2)), [0, 1])
        with self.assertRaises(InputDomainError):
            RandomForest.fit(np.array([[0.], [np.inf]]), [0, 1])
        with self.assertRaises(InputDomainError):
            RandomForest.fit(np.zeros((2, 2)), [0, 3], n_classes=2)
        with self.assertRaises(NotValidForestParams):
            ForestParams(n_trees=0)
        with self.assertRaises(NotValidForestParams):
            ForestParams(min_samples_split=1)
        with self.assertRaises(NotValidForestParams):
            RandomForest.fit(np.zeros((2, 2)), [0, 1], ForestParams(max_features=3))
