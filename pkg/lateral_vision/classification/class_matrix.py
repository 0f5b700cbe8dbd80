"""
Constituent class matrices: accumulation of per-model `(C, P)` predictions, normalization to
the 0-100 scale, perceptions and the final combined matrix.
"""
from dataclasses import dataclass
from logging import getLogger
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .types import (TIE_TOLERANCE, ClassLabel, InputDomainError, PartPrediction,
                    Perception, ProbabilityVector, ScoreScale)

logger = getLogger(__name__)

NORMALIZED_MAX = 100.


class ClassMatrixDimensionMismatch(InputDomainError):
    pass


class NegativeClassMatrixEntry(InputDomainError):
    pass


class ClassMatrixScaleError(InputDomainError):
    pass


@dataclass(frozen=True, eq=False)
class ClassMatrix:
    entries: np.ndarray
    scale: ScoreScale = ScoreScale.RAW

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.float64)
        if entries.ndim != 1 or entries.size < 2:
            raise InputDomainError(f'Class matrix must be 1-D with at least 2 classes, shape={entries.shape}')
        if not np.all(np.isfinite(entries)):
            raise InputDomainError('Class matrix contains non finite entries')
        if self.scale not in (ScoreScale.RAW, ScoreScale.NORMALIZED):
            raise ClassMatrixScaleError(f'Not valid class matrix scale={self.scale}')
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @classmethod
    def zeros(cls, n_classes: int, scale: ScoreScale = ScoreScale.RAW) -> 'ClassMatrix':
        return cls(np.zeros(n_classes), scale)

    @property
    def n_classes(self) -> int:
        return self.entries.size

    @property
    def is_normalized(self) -> bool:
        return self.scale is ScoreScale.NORMALIZED

    def top_k(self, k: int) -> List[Tuple[ClassLabel, float]]:
        """
        :return: `k` best `(label, score)` pairs, score descending and smallest index first on ties
        """
        order = np.lexsort((np.arange(self.n_classes), -self.entries))[:k]
        return [(ClassLabel(int(index), self.n_classes), float(self.entries[index])) for index in order]

    def __eq__(self, other):
        return (isinstance(other, ClassMatrix) and self.scale is other.scale
                and np.array_equal(self.entries, other.entries))

    def __hash__(self):
        return hash((self.entries.tobytes(), self.scale))

    def __repr__(self):
        return f'ClassMatrix(scale={self.scale.value}, entries={np.round(self.entries, 4).tolist()})'


def accumulate(predictions: Iterable[PartPrediction], n_classes: int) -> ClassMatrix:
    """
    Add every model prediction to the entry of its predicted class. Unrecognized parts carry
    probability 0, so they add nothing
    :param predictions: one `(C, P)` per model
    :param n_classes:
    :return: Raw class matrix
    """
    if n_classes < 2:
        raise InputDomainError(f'At least 2 classes are required, n_classes={n_classes}')
    entries = np.zeros(n_classes)
    for prediction in predictions:
        index = prediction.label.index
        if not 0 <= index < n_classes or prediction.label.n_classes != n_classes:
            raise InputDomainError(f'Prediction label={index} for part={prediction.part.value} '
                                   f'out of range for n_classes={n_classes}')
        entries[index] += prediction.probability if prediction.recognized else 0.
    return ClassMatrix(entries, ScoreScale.RAW)


def normalize(matrix: ClassMatrix) -> ClassMatrix:
    """
    Scale entries so the maximum becomes exactly 100. An all-zero matrix stays all-zero
    """
    entries = matrix.entries
    if np.any(entries < 0.):
        raise NegativeClassMatrixEntry(f'Cannot normalize negative entries {entries[entries < 0.].tolist()}')
    maximum = entries.max()
    if maximum <= 0.:
        return ClassMatrix(entries.copy(), ScoreScale.NORMALIZED)
    normalized = entries * (NORMALIZED_MAX / maximum)
    normalized[entries == maximum] = NORMALIZED_MAX  # Avoid 99.99999999999999
    return ClassMatrix(normalized, ScoreScale.NORMALIZED)


def _perceive(values: np.ndarray, scale: ScoreScale) -> Perception:
    n_classes = values.size
    if n_classes < 2:
        raise InputDomainError(f'At least 2 classes are required, n_classes={n_classes}')
    index = int(np.argmax(values))  # Smallest index on ties
    score = float(values[index])
    tied = int(np.count_nonzero(np.abs(values - score) <= TIE_TOLERANCE))
    return Perception(ClassLabel(index, n_classes), score, confused=tied >= 2, scale=scale)


def constituent_perception(matrix: ClassMatrix) -> Perception:
    """
    CLP: best class of a constituent class matrix, confused when the maximum is shared
    """
    return _perceive(matrix.entries, matrix.scale)


def holistic_perception(probabilities: ProbabilityVector) -> Perception:
    """
    HLP: best class of the whole-image probabilities
    """
    return _perceive(probabilities.values, ScoreScale.PROBABILITY)


def rescale_holistic(probabilities: ProbabilityVector) -> np.ndarray:
    """
    Put holistic probabilities on the 0-100 scale shared with normalized class matrices
    """
    return probabilities.values * NORMALIZED_MAX


def combine_final(cm_c: ClassMatrix, cm_a: ClassMatrix, holistic: ProbabilityVector) -> ClassMatrix:
    """
    CM_f: entrywise sum of the context matrix, the attention matrix and the rescaled
    holistic probabilities. The sum is kept raw, argmax does not depend on its scale
    """
    for name, matrix in (('cm_c', cm_c), ('cm_a', cm_a)):
        if not matrix.is_normalized:
            raise ClassMatrixScaleError(f'{name} must be normalized before combining')
    dimensions = {cm_c.n_classes, cm_a.n_classes, holistic.n_classes}
    if len(dimensions) != 1:
        raise ClassMatrixDimensionMismatch(f'Cannot combine matrices with n_classes={sorted(dimensions)}')
    return ClassMatrix(cm_c.entries + cm_a.entries + rescale_holistic(holistic), ScoreScale.RAW)


def final_prediction(cm_f: ClassMatrix) -> Perception:
    """
    FP: best class of the final matrix, smallest index and `confused=True` on ties
    """
    return _perceive(cm_f.entries, cm_f.scale)


def top_k_probabilities(probabilities: ProbabilityVector, k: int) -> List[Tuple[ClassLabel, float]]:
    values = probabilities.values
    order = np.lexsort((np.arange(values.size), -values))[:k]
    return [(ClassLabel(int(index), values.size), float(values[index])) for index in order]


def sparse_matrix(scores: Sequence[Tuple[int, float]], n_classes: int,
                  scale: ScoreScale = ScoreScale.NORMALIZED) -> ClassMatrix:
    """
    :param scores: `(index, score)` pairs, other classes are 0
    """
    entries = np.zeros(n_classes)
    for index, score in scores:
        if not 0 <= index < n_classes:
            raise InputDomainError(f'Class index={index} out of range [0, {n_classes})')
        entries[index] = score
    return ClassMatrix(entries, scale)
