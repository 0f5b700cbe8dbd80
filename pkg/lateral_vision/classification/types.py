"""
Shared vocabulary of the lateralized classifier: labels, parts, predictions, perceptions,
phase signals and decision traces. Every value here is immutable once built.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

# Scores closer than this are considered tied
TIE_TOLERANCE = 1e-9
SOFTMAX_TOLERANCE = 1e-6


class LateralVisionException(Exception):
    pass


class InputDomainError(LateralVisionException, ValueError):
    """
    A precondition of an operation was violated by its input
    """
    pass


class PartKind(Enum):
    BACK = 'back'
    BEAK = 'beak'
    BELLY = 'belly'
    BREAST = 'breast'
    CROWN = 'crown'
    EYE = 'eye'
    FOREHEAD = 'forehead'
    NAPE = 'nape'
    TAIL = 'tail'
    THROAT = 'throat'
    WING = 'wing'
    FACE = 'face'
    WHOLE_IMAGE = 'whole_image'

    @property
    def is_constituent(self) -> bool:
        return self in CONSTITUENT_PARTS

    @property
    def is_configural(self) -> bool:
        return self is PartKind.FACE

    @property
    def is_holistic(self) -> bool:
        return self is PartKind.WHOLE_IMAGE


CONSTITUENT_PARTS: Tuple[PartKind, ...] = (PartKind.BACK, PartKind.BEAK, PartKind.BELLY, PartKind.BREAST,
                                           PartKind.CROWN, PartKind.EYE, PartKind.FOREHEAD, PartKind.NAPE,
                                           PartKind.TAIL, PartKind.THROAT, PartKind.WING)
# Parts cropped and fed to constituent/configural predictors, in accumulation order
CROPPED_PARTS: Tuple[PartKind, ...] = CONSTITUENT_PARTS + (PartKind.FACE,)


class PhaseSignal(Enum):
    INHIBIT = 'inhibit'
    EXCITE = 'excite'


class ScoreScale(Enum):
    RAW = 'raw'
    NORMALIZED = 'normalized_0_100'
    PROBABILITY = 'probability'
    VOTES = 'votes'  # Agreeing perceptions behind a final decision


class DecisionRule(Enum):
    INHIBIT = 'inhibit'  # Context phase was confident
    MAJORITY = 'majority'  # Two perceptions agreed
    FINAL_MATRIX = 'final_matrix'  # Argmax of CM_f


@dataclass(frozen=True)
class ClassLabel:
    index: int
    n_classes: int

    def __post_init__(self):
        if self.n_classes < 2:
            raise InputDomainError(f'At least 2 classes are required, n_classes={self.n_classes}')
        if not 0 <= self.index < self.n_classes:
            raise InputDomainError(f'Class index={self.index} out of range [0, {self.n_classes})')

    @classmethod
    def from_species_id(cls, species_id: int, n_classes: int) -> 'ClassLabel':
        """
        :param species_id: 1-based id as used by external datasets (`class-1` ... `class-200`)
        """
        return cls(species_id - 1, n_classes)

    @property
    def species_id(self) -> int:
        return self.index + 1

    @property
    def species(self) -> str:
        return f'class-{self.species_id}'

    def __str__(self):
        return self.species


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 2:
            raise InputDomainError(f'Probability vector must be 1-D with at least 2 classes, shape={values.shape}')
        if not np.all(np.isfinite(values)):
            raise InputDomainError('Probability vector contains non finite values')
        if np.any(values < 0.) or np.any(values > 1. + TIE_TOLERANCE):
            raise InputDomainError('Probability vector entries must lie in [0, 1]')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_softmax(cls, values: Sequence[float]) -> 'ProbabilityVector':
        vector = cls(np.asarray(values))
        if not vector.is_distribution:
            raise InputDomainError(f'Softmax output sums to {vector.values.sum()}, not 1')
        return vector

    @property
    def n_classes(self) -> int:
        return self.values.size

    @property
    def is_distribution(self) -> bool:
        return abs(float(self.values.sum()) - 1.) <= SOFTMAX_TOLERANCE

    def top(self) -> Tuple[ClassLabel, float]:
        index = int(np.argmax(self.values))  # First index on ties
        return ClassLabel(index, self.n_classes), float(self.values[index])

    def __eq__(self, other):
        return isinstance(other, ProbabilityVector) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


@dataclass(frozen=True)
class PartPrediction:
    """
    Output of one model for one part, `(C, P)`. Unrecognized parts carry probability 0
    """
    part: PartKind
    label: ClassLabel
    probability: float
    recognized: bool = True

    def __post_init__(self):
        if not 0. <= self.probability <= 1. + TIE_TOLERANCE:
            raise InputDomainError(f'Probability={self.probability} for part={self.part.value} not in [0, 1]')
        if not self.recognized and self.probability != 0.:
            raise InputDomainError(f'Unrecognized part={self.part.value} must have probability 0')

    @classmethod
    def unrecognized(cls, part: PartKind, n_classes: int) -> 'PartPrediction':
        return cls(part, ClassLabel(0, n_classes), 0., recognized=False)

    @classmethod
    def from_probabilities(cls, part: PartKind, probabilities: ProbabilityVector) -> 'PartPrediction':
        label, probability = probabilities.top()
        return cls(part, label, min(probability, 1.))


@dataclass(frozen=True)
class Perception:
    label: ClassLabel
    score: float
    confused: bool
    scale: ScoreScale = ScoreScale.NORMALIZED

    def __post_init__(self):
        if not self.score >= 0.:
            raise InputDomainError(f'Perception score must be >= 0, score={self.score}')

    @property
    def suppressed(self) -> bool:
        """
        :return: `True` when no evidence backs the perception at all, it won't vote
        """
        return self.score <= TIE_TOLERANCE


@dataclass(frozen=True)
class ScoreListing:
    """
    Top-k `(label, score)` pairs of a perception, used for narration
    """
    entries: Tuple[Tuple[ClassLabel, float], ...]
    scale: ScoreScale


@dataclass(frozen=True)
class DecisionTrace:
    """
    Decision of one image. `confident`, and so the `INHIBIT` signal, holds when both context perceptions
    name the same class, the constituent one is not confused and the holistic one is not suppressed
    """
    image_id: str
    n_classes: int
    context_clp: Perception
    context_hlp: Perception
    confident: bool
    signal: PhaseSignal
    cm_c: 'ClassMatrix'  # noqa F821
    final: Perception
    rule: DecisionRule
    attention_clp: Optional[Perception] = None
    cm_a: Optional['ClassMatrix'] = None  # noqa F821
    cm_f: Optional['ClassMatrix'] = None  # noqa F821
    feature_extractions: int = 0
    listings: Dict[str, ScoreListing] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.signal is PhaseSignal.INHIBIT:
            if self.attention_clp is not None or self.cm_a is not None or self.cm_f is not None:
                raise InputDomainError(f'Image={self.image_id} was inhibited but carries attention results')
            if self.feature_extractions:
                raise InputDomainError(f'Image={self.image_id} was inhibited but extracted features')
        if self.confident != (self.signal is PhaseSignal.INHIBIT):
            raise InputDomainError(f'Image={self.image_id} confident flag disagrees with signal')

    @property
    def final_label(self) -> ClassLabel:
        return self.final.label
