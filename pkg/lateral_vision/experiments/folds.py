"""
Stratified k-fold plans
"""
from collections import defaultdict
from logging import getLogger
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from lateral_vision.classification.types import InputDomainError

logger = getLogger(__name__)


class NotEnoughSamples(InputDomainError):
    pass


class FoldPlan(NamedTuple):
    k: int
    seed: int
    folds: Tuple[Tuple[str, ...], ...]  # Test ids of every fold

    def test_ids(self, fold: int) -> Tuple[str, ...]:
        return self.folds[fold]

    def train_ids(self, fold: int) -> Tuple[str, ...]:
        return tuple(image_id for i, ids in enumerate(self.folds) if i != fold for image_id in ids)

    @property
    def sizes(self) -> List[int]:
        return [len(ids) for ids in self.folds]

    def to_dict(self) -> Dict[str, Any]:
        return {'k': self.k, 'seed': self.seed, 'folds': [list(ids) for ids in self.folds]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FoldPlan':
        return cls(data['k'], data['seed'], tuple(tuple(ids) for ids in data['folds']))


def make_folds(ids: Sequence[str], k: int = 10, seed: int = 0,
               labels: Optional[Sequence[Optional[int]]] = None) -> FoldPlan:
    """
    Every class is shuffled on its own, the classes are laid one after the other and position `i`
    goes to fold `i % k`. Fold sizes differ by one at most and every fold holds the floor or the
    ceiling of `n_class / k` images of every class
    :param ids: image ids, unique
    :param k:
    :param seed:
    :param labels: class of every id, not stratified if `None`
    :return: Fold plan, test ids of every fold sorted as in `ids`
    """
    if k < 2:
        raise InputDomainError(f'At least 2 folds are required, k={k}')
    if len(ids) < k:
        raise NotEnoughSamples(f'Cannot split {len(ids)} images in {k} folds')
    if len(set(ids)) != len(ids):
        raise InputDomainError('Image ids are repeated')
    if labels is None:
        labels = [None] * len(ids)
    elif len(labels) != len(ids):
        raise InputDomainError(f'Got {len(labels)} labels for {len(ids)} ids')

    by_class = defaultdict(list)
    for position, label in enumerate(labels):
        by_class[-1 if label is None else label].append(position)

    rng = np.random.default_rng(seed)
    order = []
    for label in sorted(by_class):
        order.extend(int(position) for position in rng.permutation(by_class[label]))

    assignment = np.empty(len(ids), dtype=np.int64)
    assignment[order] = np.arange(len(order)) % k
    folds = tuple(tuple(ids[position] for position in range(len(ids)) if assignment[position] == fold)
                  for fold in range(k))
    logger.debug('Fold plan of %d images, k=%d, sizes=%s', len(ids), k, [len(fold) for fold in folds])
    return FoldPlan(k, seed, folds)
