import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from packaging.version import Version

from lateral_vision.classification.types import InputDomainError, ProbabilityVector

from .tree import DecisionTree

logger = getLogger(__name__)

FOREST_FORMAT_VERSION = '1.0.0'


class ForestException(Exception):
    pass


class EmptyTrainingSet(ForestException, InputDomainError):
    pass


class FeatureDimensionMismatch(ForestException, InputDomainError):
    pass


class NotValidForestParams(ForestException, InputDomainError):
    pass


class ForestFormatNotSupported(ForestException):
    pass


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: Optional[int] = None  # `None` for ⌈√d⌉
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    seed: int = 0
    n_jobs: int = 1
    debug: bool = False  # Keep split logs

    def __post_init__(self):
        if self.n_trees < 1:
            raise NotValidForestParams(f'At least one tree is required, n_trees={self.n_trees}')
        if self.max_features is not None and self.max_features < 1:
            raise NotValidForestParams(f'Not valid max_features={self.max_features}')
        if self.max_depth is not None and self.max_depth < 0:
            raise NotValidForestParams(f'Not valid max_depth={self.max_depth}')
        if self.min_samples_split < 2 or self.n_jobs < 1:
            raise NotValidForestParams(f'Not valid forest params {self}')

    def features_per_split(self, n_features: int) -> int:
        max_features = self.max_features or math.ceil(math.sqrt(n_features))
        if max_features > n_features:
            raise NotValidForestParams(f'max_features={max_features} greater than n_features={n_features}')
        return max_features


class OobReport(NamedTuple):
    score: float
    evaluated: int
    excluded: int  # Instances with no out-of-bag tree


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, tree_index])


def bootstrap_indices(rng: np.random.Generator, n_samples: int) -> np.ndarray:
    return rng.integers(0, n_samples, size=n_samples)


class RandomForest:
    def __init__(self, trees: Sequence[DecisionTree], params: ForestParams, n_classes: int, n_features: int,
                 oob_masks: Optional[np.ndarray] = None):
        self.trees = list(trees)
        self.params = params
        self.n_classes = n_classes
        self.n_features = n_features
        self.oob_masks = oob_masks  # (n_trees, n_samples), `True` if the sample was out of the bag

    @classmethod
    def fit(cls, X: np.ndarray, y: Sequence[int], params: ForestParams = ForestParams(),
            n_classes: Optional[int] = None) -> 'RandomForest':
        """
        Grow `n_trees` trees, each on its own bootstrap sample. Randomness of the tree `i` only depends
        on `(seed, i)`, so threaded and serial training build the same forest
        :param X: `(n_samples, n_features)`
        :param y: class indices
        :param params:
        :param n_classes: defaults to `max(y) + 1` (at least 2)
        """
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyTrainingSet(f'Cannot fit a forest with X.shape={X.shape}')
        if y.shape != (X.shape[0],):
            raise InputDomainError(f'Expected {X.shape[0]} labels, got shape={y.shape}')
        if not np.all(np.isfinite(X)):
            raise InputDomainError('Training features contain non finite values')
        n_classes = n_classes or max(int(y.max()) + 1, 2)
        if y.min() < 0 or y.max() >= n_classes:
            raise InputDomainError(f'Labels out of range [0, {n_classes})')

        n_samples, n_features = X.shape
        max_features = params.features_per_split(n_features)

        def grow(tree_index: int):
            rng = tree_rng(params.seed, tree_index)
            sample = bootstrap_indices(rng, n_samples)
            tree = DecisionTree.grow(X[sample], y[sample], n_classes, max_features, rng,
                                     max_depth=params.max_depth, min_samples_split=params.min_samples_split,
                                     debug=params.debug)
            oob_mask = np.ones(n_samples, dtype=bool)
            oob_mask[sample] = False
            return tree, oob_mask

        if params.n_jobs > 1:
            with ThreadPoolExecutor(max_workers=params.n_jobs) as executor:
                grown = list(executor.map(grow, range(params.n_trees)))
        else:
            grown = [grow(tree_index) for tree_index in range(params.n_trees)]

        trees = [tree for tree, _ in grown]
        oob_masks = np.array([oob_mask for _, oob_mask in grown])
        logger.debug('Grown forest of %d trees with %d samples, %d features and %d classes',
                     len(trees), n_samples, n_features, n_classes)
        return cls(trees, params, n_classes, n_features, oob_masks=oob_masks)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _check_dimensions(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise FeatureDimensionMismatch(f'Forest trained with {self.n_features} features, got {X.shape[1]}')
        return X

    def tree_votes(self, X: np.ndarray) -> np.ndarray:
        """
        :return: `(n_trees, n_samples)` class voted by every tree
        """
        X = self._check_dimensions(X)
        return np.array([tree.predict(X) for tree in self.trees])

    def vote_counts(self, X: np.ndarray) -> np.ndarray:
        votes = self.tree_votes(X)
        return np.array([np.bincount(column, minlength=self.n_classes) for column in votes.T])

    def predict_proba_many(self, X: np.ndarray) -> np.ndarray:
        """
        :return: `(n_samples, n_classes)` fraction of trees voting every class
        """
        return self.vote_counts(X) / self.n_trees

    def predict_proba(self, x: np.ndarray) -> ProbabilityVector:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise FeatureDimensionMismatch(f'Expected a single feature vector, shape={x.shape}')
        return ProbabilityVector.from_softmax(self.predict_proba_many(x)[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        """
        :return: Plurality class, smallest index on ties
        """
        return np.argmax(self.vote_counts(X), axis=1)

    def oob_score(self, X: np.ndarray, y: Sequence[int]) -> OobReport:
        """
        Accuracy of the votes of the trees that did not see every instance. Instances seen by every
        tree are excluded and counted
        :param X: the training set the forest was fitted with
        :param y:
        """
        X = self._check_dimensions(X)
        y = np.asarray(y, dtype=np.int64)
        if self.oob_masks is None or self.oob_masks.shape[1] != X.shape[0]:
            raise InputDomainError('Out-of-bag score requires the training set the forest was fitted with')

        votes = self.tree_votes(X)  # (n_trees, n_samples)
        counts = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        for tree_votes, oob_mask in zip(votes, self.oob_masks):
            rows = np.flatnonzero(oob_mask)
            np.add.at(counts, (rows, tree_votes[rows]), 1)

        evaluated = counts.sum(axis=1) > 0
        n_evaluated = int(np.count_nonzero(evaluated))
        excluded = X.shape[0] - n_evaluated
        if excluded:
            logger.info('%d instances have no out-of-bag tree and are excluded from the score', excluded)
        if not n_evaluated:
            logger.warning('No instance has out-of-bag trees, score is not defined')
            return OobReport(0., 0, excluded)
        predictions = np.argmax(counts[evaluated], axis=1)
        score = float(np.mean(predictions == y[evaluated]))
        return OobReport(score, n_evaluated, excluded)

    def oob_fraction(self) -> float:
        """
        :return: Mean fraction of training instances left out of every bootstrap
        """
        return float(self.oob_masks.mean()) if self.oob_masks is not None else 0.

    def split_counts(self) -> np.ndarray:
        return np.sum([tree.split_counts(self.n_features) for tree in self.trees], axis=0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': FOREST_FORMAT_VERSION,
            'params': asdict(self.params),
            'n_classes': self.n_classes,
            'n_features': self.n_features,
            'trees': [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RandomForest':
        version = Version(data.get('version', '0'))
        if version.major != Version(FOREST_FORMAT_VERSION).major:
            raise ForestFormatNotSupported(f'Forest format version={version} not supported, '
                                           f'expected {FOREST_FORMAT_VERSION}')
        return cls([DecisionTree.from_dict(tree) for tree in data['trees']], ForestParams(**data['params']),
                   data['n_classes'], data['n_features'])

    def save(self, path: Union[str, Path]):
        with open(path, 'w') as json_file:
            json.dump(self.to_dict(), json_file)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RandomForest':
        with open(path) as json_file:
            return cls.from_dict(json.load(json_file))


def average_probabilities(forests: List[RandomForest], feature_vectors: Sequence[np.ndarray]) -> ProbabilityVector:
    """
    Average the probabilities of per-variant forests, `feature_vectors[i]` goes to `forests[i]`
    """
    if len(forests) != len(feature_vectors) or not forests:
        raise FeatureDimensionMismatch(f'Got {len(feature_vectors)} vectors for {len(forests)} forests')
    probabilities = np.mean([forest.predict_proba_many(vector)[0]
                             for forest, vector in zip(forests, feature_vectors)], axis=0)
    return ProbabilityVector.from_softmax(probabilities)
